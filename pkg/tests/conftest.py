import pathlib as pl
import re
from typing import Callable, Dict

import pytest

import src.graph.builder as gb
import src.graph.hetero as hg
import src.model.gnn as gnn
import src.prompt.lm as lmm
from src.config import TrainConfig

"""Shared fixtures: the bundled IR corpus, unsupported-construct samples and small model configurations."""

FIXTURES = pl.Path(__file__).parent / 'fixtures'
IR_DIR = FIXTURES / 'ir'
UNSUPPORTED_DIR = FIXTURES / 'unsupported'
IR_FILES = sorted(IR_DIR.glob('*.ll'))
UNSUPPORTED_FILES = sorted(UNSUPPORTED_DIR.glob('*.ll'))

# fixtures whose identifiers are all named and never appear inside strings
RENAMABLE = ('identity', 'globals', 'struct', 'phi_loop', 'calls', 'switch', 'float_math', 'vectors', 'memory',
             'recursion', 'nested_loops', 'matrix', 'string_table', 'casts', 'bitwise')

_SYMBOL = re.compile(r'([%@])([A-Za-z_.][\w.]*)')
_LABEL = re.compile(r'^([A-Za-z_.][\w.]*):', re.MULTILINE)

TINY_DIMS = gnn.GnnDims(hidden1=4, hidden2=4, embed=8)
TINY_LM_DIMS = lmm.LmDims(embed=8, layers=1, heads=2, context=512)


def pytest_generate_tests(metafunc):
    if 'ir_path' in metafunc.fixturenames:
        metafunc.parametrize('ir_path', IR_FILES, ids=[path.stem for path in IR_FILES])
    if 'unsupported_path' in metafunc.fixturenames:
        metafunc.parametrize('unsupported_path', UNSUPPORTED_FILES, ids=[path.stem for path in UNSUPPORTED_FILES])


def rename_identifiers(text: str, prefix: str = 'r_') -> str:
    """Consistently renames every local, global and label of an IR text"""
    text = _SYMBOL.sub(lambda m: f'{m.group(1)}{prefix}{m.group(2)}', text)
    return _LABEL.sub(lambda m: f'{prefix}{m.group(1)}:', text)


@pytest.fixture
def rename() -> Callable[..., str]:
    return rename_identifiers


@pytest.fixture(scope='session')
def ir_dir() -> pl.Path:
    return IR_DIR


@pytest.fixture(scope='session')
def fixture_graphs() -> Dict[str, hg.HeteroGraph]:
    """Graph of every bundled fixture, keyed by file stem"""
    return {path.stem: gb.graph_file(path) for path in IR_FILES}


@pytest.fixture
def tiny_dims() -> gnn.GnnDims:
    return TINY_DIMS


@pytest.fixture
def tiny_config() -> Callable[..., TrainConfig]:
    def make(**overrides) -> TrainConfig:
        settings = dict(seed=7, hidden1=TINY_DIMS.hidden1, hidden2=TINY_DIMS.hidden2, embed=TINY_DIMS.embed,
                        batch_size=4)
        settings.update(overrides)
        return TrainConfig(**settings)
    return make


@pytest.fixture
def tiny_lm() -> lmm.FrozenLm:
    return lmm.init_lm(TINY_LM_DIMS, seed=0)
