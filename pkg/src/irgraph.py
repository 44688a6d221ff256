from __future__ import annotations

import json
import logging
import sys
from typing import List, Optional, TextIO

import src.commands.bench_commands as bcmd
import src.commands.graph_commands as gcmd
import src.commands.train_commands as tcmd
import src.util as u
import src.utility.cmd_enum as ce
from src.config import ENV_FILE, GlobalConfig, load_env_file
from src.errors import IrGraphError

"""Main entry point of the irgraph tool: one subcommand per stage of the pipeline, from LLVM IR text to program
graphs, trained GNN checkpoints, soft prompts and benchmark reports."""

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
HELP_FLAGS = ('-h', '--help', 'help')


class IrGraphCommands(ce.CmdEnum):
    """Supported subcommands mapped to their names"""
    PARSE = ce.Command('parse', gcmd.parse_cmd_func, 'parse an LLVM IR file and summarise the module')
    GRAPH = ce.Command('graph', gcmd.graph_cmd_func, 'build and store program graphs')
    PRETRAIN = ce.Command('pretrain', tcmd.pretrain_cmd_func, 'masked node-value pretraining')
    FINETUNE = ce.Command('finetune', tcmd.finetune_cmd_func, 'soft prompt fine-tuning against a frozen LM')
    TRAIN = ce.Command('train', tcmd.train_cmd_func, 'classifier fine-tuning on a labeled corpus')
    EMBED = ce.Command('embed', gcmd.embed_cmd_func, 'graph (and node) embeddings of one file')
    PROMPT_EXPORT = ce.Command('prompt-export', gcmd.prompt_export_cmd_func, 'export soft prompt prefix rows')
    ABLATE = ce.Command('ablate', bcmd.ablate_cmd_func, 'node and edge kind ablation study')
    EVAL = ce.Command('eval', bcmd.eval_cmd_func, 'score a checkpoint on a labeled corpus')
    MAKE_CORPUS = ce.Command('make-corpus', bcmd.make_corpus_cmd_func, 'write a synthetic labeled corpus')

    @classmethod
    def execute_params(cls, args: List[str], config: GlobalConfig) -> ce.Outcome:
        return super().execute_params_with_checks(args, config)


def usage() -> str:
    return 'usage: irgraph <command> [options]  (irgraph <command> --help for its options)\n\n' + \
        IrGraphCommands.help_text()


def report_error(exc: IrGraphError, as_json: bool, stderr: TextIO) -> None:
    if as_json:
        print(json.dumps({'error': exc.code, 'message': str(exc)}, sort_keys=True), file=stderr)
    else:
        print(f'error[{exc.code}]: {exc}', file=stderr)


def dispatch(argv: List[str], environ=None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    """Runs one command line and maps its outcome to an exit code
    :param argv: arguments after the program name
    :param environ: environment to read IRGRAPH_* settings from, os.environ by default
    :param stdout: stream receiving results
    :param stderr: stream receiving diagnostics
    :return: 0 on success, 1 on internal errors, the error's exit code on library errors
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    as_json = '--json' in argv
    if not argv or argv[0] in HELP_FLAGS:
        print(usage(), file=stdout)
        return EXIT_OK
    try:
        config = GlobalConfig.from_env(environ)
        u.configure_logging(config.verbosity)
        result = IrGraphCommands.execute_params(argv, config)
    except SystemExit as exc:  # --help of a command
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except IrGraphError as exc:
        report_error(exc, as_json, stderr)
        return exc.exit_code
    except Exception as exc:
        log.debug('internal error', exc_info=True)
        if as_json:
            print(json.dumps({'error': 'E_INTERNAL', 'message': repr(exc)}, sort_keys=True), file=stderr)
        else:
            print(f'error[E_INTERNAL]: {exc!r}', file=stderr)
        return EXIT_INTERNAL
    print(u.dump_json(result.doc) if result.as_json else result.text, file=stdout)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_env_file(ENV_FILE)
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == '__main__':
    sys.exit(main())
