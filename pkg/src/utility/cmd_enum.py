from __future__ import annotations

import dataclasses as dc
import enum as e
from typing import Any, Callable, Dict, List

from src.config import GlobalConfig
from src.errors import UsageError


@dc.dataclass(frozen=True)
class Outcome:
    """What a command reports: a JSON document for --json and the human-readable text otherwise"""
    doc: Dict[str, Any]
    text: str
    as_json: bool = False


@dc.dataclass(frozen=True)
class Command:
    name: str  # str id
    func: Callable[[List[str], GlobalConfig], Outcome]  # method to call
    help: str  # what this cmd does


class CmdEnum(e.Enum):
    def __eq__(self, other: Any) -> bool:
        if isinstance(other, type(self)):
            return self is other
        elif isinstance(other, str):
            return other == self.value.name
        return False

    def __hash__(self) -> int:
        return hash(self.value.name)

    @classmethod
    def values_as_str(cls) -> str:
        return ', '.join(item.value.name for item in cls)

    @classmethod
    def help_text(cls) -> str:
        width = max(len(mode.value.name) for mode in cls)
        return 'commands:\n' + '\n'.join(f'  {mode.value.name:<{width}}  {mode.value.help}' for mode in cls)

    @classmethod
    def execute_params_with_checks(cls, args: List[str], config: GlobalConfig,
                                   checks: List[Callable[[List[str]], None]] = None) -> Outcome:
        """Runs the command named by the first parameter with the remaining ones, ie "cmd arg1 ... argn". Raises
        UsageError when no command or an unsupported one is given.
        :param args: command name followed by its arguments
        :param config: process-wide settings handed to the command
        :param checks: extra validations of the raw parameters, run before dispatching
        :return: outcome of the executed command
        """
        if not args:
            raise UsageError(f'no command given, must be one of {cls.values_as_str()}')

        if checks:
            for check in checks:
                check(args)

        cmd, params = args[0], args[1:]
        for mode in cls:
            if cmd == mode:
                return mode.value.func(params, config)
        raise UsageError(f'invalid command {cmd}, must be one of {cls.values_as_str()}')
