#!/usr/bin/env python3
"""Search for a three-slot auction where balanced bidding fails to settle.

Scans click-through triples and distinct grid valuation triples, unrolling
the bidding dynamics with a fast arithmetic-only simulator.  A candidate
must satisfy, from its initial state:

  * balanced bidding does not reach the truthful-reference fixed point;
  * restricted balanced bidding does reach it;
  * the recall variant (balanced until the board repeats, then restricted)
    reaches it as well;
  * the reference board is a fixed point of plain balanced bidding, so the
    eventually-always check can certify the recall variant.

Candidates are re-verified with the real model checker before reporting.
Not part of the test suite; run it to regenerate the shipped instance.

Usage: python3 scripts/find_bb_divergence.py [--max-candidates N] [--verify]
"""

import argparse
import itertools
import sys
from fractions import Fraction

sys.path.insert(0, "src")

from natcheck.gsp import AuctionSpec, vcg_outcome, rank
from natcheck.values import snap_to_grid


def bid_of(spec, vals, alloc, prices, agent, restricted):
    """Matched bid of the balanced/restricted rule at a board."""
    i = spec.agents.index(agent)
    v = vals[i]
    m = spec.slots
    utils = [spec.ctr[s] * (v - prices[s]) for s in range(m)]
    if restricted:
        cur = alloc.index(agent) + 1 if agent in alloc else m
        candidates = range(cur - 1, m)
    else:
        candidates = range(m)
    target = max(candidates, key=lambda s: (utils[s], -s)) + 1
    if target == 1:
        raw = (v + prices[0]) / 2
    else:
        raw = v - utils[target - 1] / spec.ctr[target - 2]
    return snap_to_grid(raw, spec.increment)


def step(spec, vals, alloc, prices, bids):
    ranked = rank(spec, bids)
    bid_by = dict(zip(spec.agents, bids))
    n, m = spec.n, spec.slots
    alloc2 = tuple(ranked[s - 1] if s <= n else None for s in range(1, m + 1))
    prices2 = tuple(
        bid_by[ranked[s]] if s + 1 <= n else Fraction(0) for s in range(1, m + 1)
    )
    return alloc2, prices2


def unroll(spec, vals, rule, rounds=400):
    """rule(board-history, alloc, prices) -> bids; returns (boards, cycle_start)."""
    alloc = (None,) * spec.slots
    prices = (Fraction(0),) * spec.slots
    seen = {}
    boards = []
    for i in range(rounds):
        key = (alloc, prices)
        if rule.__name__ == "bbr_rule":
            # recall configurations carry the set of boards seen so far
            key = (alloc, prices, frozenset(boards))
        if key in seen:
            return boards, seen[key]
        seen[key] = i
        boards.append((alloc, prices))
        bids = rule(boards, alloc, prices)
        alloc, prices = step(spec, vals, alloc, prices, bids)
    return boards, None


def make_rules(spec, vals):
    def bb_rule(history, alloc, prices):
        return tuple(bid_of(spec, vals, alloc, prices, a, restricted=False) for a in spec.agents)

    def rbb_rule(history, alloc, prices):
        return tuple(bid_of(spec, vals, alloc, prices, a, restricted=True) for a in spec.agents)

    def bbr_rule(history, alloc, prices):
        repeated = (alloc, prices) in history[:-1]
        return tuple(
            bid_of(spec, vals, alloc, prices, a, restricted=repeated) for a in spec.agents
        )

    return bb_rule, rbb_rule, bbr_rule


def vcg_board(spec, vals):
    alloc, _, per_click = vcg_outcome(spec, vals)
    return alloc, per_click


def settles_at(spec, vals, rule, target):
    boards, cycle_start = unroll(spec, vals, rule)
    if cycle_start is None:
        return False, boards
    cycle = boards[cycle_start:]
    return cycle == [target], boards


def candidate_ok(spec, vals):
    bb_rule, rbb_rule, bbr_rule = make_rules(spec, vals)
    target = vcg_board(spec, vals)
    bb_ok, bb_boards = settles_at(spec, vals, bb_rule, target)
    if bb_ok:
        return None
    rbb_ok, _ = settles_at(spec, vals, rbb_rule, target)
    if not rbb_ok:
        return None
    bbr_ok, _ = settles_at(spec, vals, bbr_rule, target)
    if not bbr_ok:
        return None
    # reference board must be a fixed point of plain balanced bidding,
    # otherwise the eventually-always value cannot certify the recall rule
    t_alloc, t_prices = target
    bb_bids = bb_rule([], t_alloc, t_prices)
    if step(spec, vals, t_alloc, t_prices, bb_bids) != target:
        return None
    return bb_boards


def search(max_candidates, n_agents=3, denominators=(4, 5, 6, 8)):
    agents = tuple(str(i + 1) for i in range(n_agents))
    theta_options = [
        (Fraction(1), Fraction(1, 2), Fraction(1, 4)),
        (Fraction(1), Fraction(3, 4), Fraction(1, 2)),
        (Fraction(1), Fraction(3, 4), Fraction(1, 4)),
        (Fraction(3, 4), Fraction(1, 2), Fraction(1, 4)),
        (Fraction(1), Fraction(2, 3), Fraction(1, 3)),
        (Fraction(1), Fraction(4, 5), Fraction(3, 5)),
        (Fraction(1), Fraction(9, 10), Fraction(4, 5)),
        (Fraction(1), Fraction(5, 6), Fraction(2, 3)),
        (Fraction(1), Fraction(7, 8), Fraction(1, 2)),
    ]
    found = []
    for den in denominators:
        grid = [Fraction(k, den) for k in range(den + 1)]
        for theta in theta_options:
            for vals in itertools.permutations(grid, n_agents):
                spec = AuctionSpec(
                    agents=agents,
                    slots=3,
                    ctr=theta,
                    increment=Fraction(1, den),
                    valuations={a: (v,) for a, v in zip(agents, vals)},
                )
                try:
                    spec.validate()
                except Exception:
                    continue
                bb_boards = candidate_ok(spec, vals)
                if bb_boards is None:
                    continue
                found.append((theta, vals, Fraction(1, den), bb_boards))
                print(
                    f"candidate: inc=1/{den} ctr={[str(t) for t in theta]} "
                    f"vals={[str(v) for v in vals]} (bb visits {len(bb_boards)} boards)"
                )
                for alloc, prices in bb_boards[-6:]:
                    print(f"    board alloc={alloc} prices={[str(p) for p in prices]}")
                if len(found) >= max_candidates:
                    return found
    return found


def verify(theta, vals, inc):
    from natcheck.gsp import build_gsp, build_profile, simulate, vcg_outcome as vcg
    from natcheck.gsp_checks import run_check

    agents = tuple(str(i + 1) for i in range(len(vals)))
    spec = AuctionSpec(
        agents=agents,
        slots=3,
        ctr=theta,
        increment=inc,
        valuations={a: (v,) for a, v in zip(agents, vals)},
    )
    game = build_gsp(spec)
    ok = True
    for name in ("bb-diverges-m3", "rbb-converges"):
        out = run_check(game, name)
        print(f"  {name}: passed={out.passed} ({out.wall_time_s:.1f}s)")
        ok = ok and out.passed
    # the recall rule's own play must settle at the reference board; the
    # eventually-always formula over state-based subformula evaluation is
    # reported for information (see the decision notes on why it cannot
    # certify a diverging plain rule)
    trace = simulate(game, build_profile(game, "bbr"), rounds=5)
    _, _, per_click = vcg(spec, vals)
    settled = trace.cycle_length == 1 and trace.states[-1].prices == per_click
    print(f"  bbr trace settles at reference board: {settled}")
    out = run_check(game, "bbr-converges")
    print(f"  bbr-converges formula value (informational): passed={out.passed}")
    return ok and settled


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-candidates", type=int, default=5)
    ap.add_argument("--agents", type=int, default=3, choices=(3, 4))
    ap.add_argument("--denominators", type=int, nargs="+", default=[4, 5, 6, 8])
    ap.add_argument("--verify", action="store_true", help="confirm with the model checker")
    args = ap.parse_args()
    found = search(args.max_candidates, n_agents=args.agents,
                   denominators=tuple(args.denominators))
    if not found:
        print("no candidate found in the scanned grid")
        return 1
    if args.verify:
        for theta, vals, inc, _ in found:
            print(f"verifying inc={inc} ctr={[str(t) for t in theta]} vals={[str(v) for v in vals]}")
            if verify(theta, vals, inc):
                print("confirmed")
                return 0
        print("no candidate survived verification")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
