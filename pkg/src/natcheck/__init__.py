"""Quantitative model checking of natural strategies on weighted games,
with a repeated keyword-auction workbench."""

from .checker import CheckReport, Evaluator, Lasso, check, eval_formula, outcome_lasso
from .fixtures import load_fixture
from .formulas import parse_formula
from .gsp import (
    AuctionSpec,
    bb_divergent_spec,
    build_gsp,
    build_profile,
    desk_spec,
    desk_spec_multi,
    equilibrium_bid,
    parse_auction_spec,
    simulate,
    vcg_outcome,
)
from .guards import eval_we, parse_we, we_size
from .strategies import (
    NatStrategy,
    compile_guard,
    compl,
    consistent,
    enumerate_strategies,
    match_index,
    parse_pool,
    parse_regex,
    parse_strategies,
    select_action,
)
from .values import FuncLib, Value, apply_func, value_in_unit_interval
from .wcgs import WCGS, load_model, parse_model, serialize_model

__version__ = "0.1.0"
