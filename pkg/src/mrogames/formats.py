"""Structured-text schemas for games, policies, topologies, matrices,
mixtures and value tables, plus the convergence CSV.

All formats are line-oriented: ``[section]`` headers, ``key = value``
pairs or whitespace-separated token rows, ``#`` comments.  Writers emit a
canonical form (full-precision floats, successors sorted by next state)
so identical in-memory values always produce identical bytes.  Game and
reward entries are sparse: a (state, blue, red) triple with no transition
lines is a probability-1 self-loop, and absent reward lines are 0.

The convergence CSV column order is fixed: iteration, one gain column per
Blue oracle then per Red oracle, the two selected best gains, value,
exploitability, new_cells, cumulative_evaluations, epsilon_ptm.  Floats
in the CSV carry 12 significant digits.
"""

from __future__ import annotations

import numpy as np

from ._util import fmt_exact, fmt_float
from .cyber import NetworkTopology
from .errors import ParseError
from .game import MarkovGame, Mixture, PolicyMetadata, TabularPolicy
from .loop import RunTrace
from .matrix import SolveResult
from .oracles import ValueFunctionTable

Row = tuple[int, list[str]]


def _strip(line: str) -> str:
    if "#" in line:
        line = line[: line.index("#")]
    return line.strip()


def _read_sections(text: str, source: str) -> dict[str, list[Row]]:
    sections: dict[str, list[Row]] = {}
    current: list[Row] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name in sections:
                raise ParseError(source, lineno, f"duplicate section [{name}]")
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise ParseError(source, lineno, "content before the first [section]")
        current.append((lineno, line.split()))
    return sections


def _kv(rows: list[Row], source: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, tokens in rows:
        if len(tokens) < 3 or tokens[1] != "=":
            raise ParseError(source, lineno, "expected 'key = value'")
        key = tokens[0]
        if key in out:
            raise ParseError(source, lineno, f"duplicate key {key!r}")
        out[key] = " ".join(tokens[2:])
    return out


def _need(sections: dict[str, list[Row]], name: str, source: str) -> list[Row]:
    if name not in sections:
        raise ParseError(source, 0, f"missing section [{name}]")
    return sections[name]


def _to_int(value: str, source: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(source, lineno, f"expected an integer, got {value!r}") from None


def _to_float(value: str, source: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(source, lineno, f"expected a number, got {value!r}") from None


def _to_bool(value: str, source: str, lineno: int) -> bool:
    if value in ("true", "True"):
        return True
    if value in ("false", "False"):
        return False
    raise ParseError(source, lineno, f"expected true/false, got {value!r}")


# -- Markov game -------------------------------------------------------------


def write_game(game: MarkovGame) -> str:
    lines = ["# zero-sum Markov game", "[game]",
             f"states = {game.state_count}",
             f"blue_actions = {game.blue_action_count}",
             f"red_actions = {game.red_action_count}",
             f"discount = {fmt_exact(game.discount)}",
             f"horizon = {'none' if game.horizon is None else game.horizon}",
             "[initial]"]
    for s in np.nonzero(game.initial_distribution)[0]:
        lines.append(f"{s} {fmt_exact(game.initial_distribution[s])}")
    trans = ["[transitions]", "# state blue red next probability"]
    rews = ["[rewards]", "# state blue red next reward"]
    a_b, a_r = game.blue_action_count, game.red_action_count
    for t in range(game.state_count * a_b * a_r):
        s, rem = divmod(t, a_b * a_r)
        b, r = divmod(rem, a_r)
        lo, hi = game.succ_offsets[t], game.succ_offsets[t + 1]
        order = np.argsort(game.succ_state[lo:hi], kind="stable") + lo
        entries = [(int(game.succ_state[k]), float(game.succ_prob[k]),
                    float(game.succ_reward[k])) for k in order
                   if game.succ_prob[k] > 0.0]
        if len(entries) == 1 and entries[0][0] == s and entries[0][1] == 1.0 \
                and entries[0][2] == 0.0:
            continue  # default self-loop
        for s2, p, rew in entries:
            trans.append(f"{s} {b} {r} {s2} {fmt_exact(p)}")
            if rew != 0.0:
                rews.append(f"{s} {b} {r} {s2} {fmt_exact(rew)}")
    return "\n".join(lines + trans + rews) + "\n"


def parse_game(text: str, source: str = "<game>") -> MarkovGame:
    sections = _read_sections(text, source)
    head = _kv(_need(sections, "game", source), source)
    for key in ("states", "blue_actions", "red_actions", "discount", "horizon"):
        if key not in head:
            raise ParseError(source, 0, f"[game] is missing {key!r}")
    states = int(head["states"])
    a_b, a_r = int(head["blue_actions"]), int(head["red_actions"])
    horizon = None if head["horizon"] == "none" else int(head["horizon"])

    initial = np.zeros(states)
    for lineno, tokens in _need(sections, "initial", source):
        if len(tokens) != 2:
            raise ParseError(source, lineno, "expected 'state probability'")
        initial[_to_int(tokens[0], source, lineno)] = _to_float(tokens[1], source, lineno)

    transitions: dict[tuple[int, int, int], list[tuple[int, float]]] = {}
    for lineno, tokens in sections.get("transitions", []):
        if len(tokens) != 5:
            raise ParseError(source, lineno, "expected 'state blue red next probability'")
        s, b, r, s2 = (_to_int(x, source, lineno) for x in tokens[:4])
        transitions.setdefault((s, b, r), []).append(
            (s2, _to_float(tokens[4], source, lineno)))
    rewards: dict[tuple[int, int, int, int], float] = {}
    for lineno, tokens in sections.get("rewards", []):
        if len(tokens) != 5:
            raise ParseError(source, lineno, "expected 'state blue red next reward'")
        s, b, r, s2 = (_to_int(x, source, lineno) for x in tokens[:4])
        rewards[(s, b, r, s2)] = _to_float(tokens[4], source, lineno)

    return MarkovGame.from_tables(states, (a_b, a_r), transitions, rewards,
                                  float(head["discount"]), horizon, initial)


# -- policy -------------------------------------------------------------------


def write_policy(policy: TabularPolicy) -> str:
    meta = policy.metadata
    lines = ["[policy]",
             f"player = {policy.player}",
             f"states = {policy.state_count}",
             f"actions = {policy.action_count}",
             "[metadata]",
             f"oracle = {meta.oracle}",
             f"iteration = {meta.iteration}",
             f"ptm_initialized = {str(meta.ptm_initialized).lower()}",
             f"shaped = {str(meta.shaped).lower()}",
             "[rows]"]
    for s in range(policy.state_count):
        row = " ".join(fmt_exact(p) for p in policy.table[s])
        lines.append(f"{s} {row}")
    return "\n".join(lines) + "\n"


def parse_policy(text: str, source: str = "<policy>") -> TabularPolicy:
    sections = _read_sections(text, source)
    head = _kv(_need(sections, "policy", source), source)
    states, actions = int(head["states"]), int(head["actions"])
    meta_kv = _kv(sections.get("metadata", []), source)
    metadata = PolicyMetadata(
        oracle=meta_kv.get("oracle", "manual"),
        iteration=int(meta_kv.get("iteration", "0")),
        ptm_initialized=meta_kv.get("ptm_initialized", "false") == "true",
        shaped=meta_kv.get("shaped", "false") == "true",
    )
    table = np.zeros((states, actions))
    seen = np.zeros(states, dtype=bool)
    for lineno, tokens in _need(sections, "rows", source):
        if len(tokens) != actions + 1:
            raise ParseError(source, lineno,
                             f"expected state plus {actions} probabilities")
        s = _to_int(tokens[0], source, lineno)
        table[s] = [_to_float(x, source, lineno) for x in tokens[1:]]
        seen[s] = True
    if not seen.all():
        raise ParseError(source, 0, f"missing row for state {int(np.argmin(seen))}")
    return TabularPolicy(table, head["player"], metadata)


# -- topology ------------------------------------------------------------------


def write_topology(topology: NetworkTopology) -> str:
    lines = ["# lateral-movement network topology", "[topology]",
             f"hosts = {topology.host_count}",
             f"entry_host = {topology.red_entry_host}",
             "[subnets]", "# host subnet"]
    lines += [f"{h} {topology.subnet_of[h]}" for h in range(topology.host_count)]
    lines.append("[edges]")
    lines += [f"{src} {dst}" for src, dst in sorted(topology.edges)]
    lines.append("[high_value]")
    lines += [str(h) for h in sorted(topology.high_value)]
    lines.append("[exploit_prob]")
    lines += [f"{h} {fmt_exact(topology.exploit_success_prob[h])}"
              for h in range(topology.host_count)]
    return "\n".join(lines) + "\n"


def parse_topology(text: str, source: str = "<topology>") -> NetworkTopology:
    sections = _read_sections(text, source)
    head = _kv(_need(sections, "topology", source), source)
    hosts = int(head["hosts"])
    subnets = [0] * hosts
    for lineno, tokens in _need(sections, "subnets", source):
        subnets[_to_int(tokens[0], source, lineno)] = _to_int(tokens[1], source, lineno)
    edges = set()
    for lineno, tokens in sections.get("edges", []):
        edges.add((_to_int(tokens[0], source, lineno), _to_int(tokens[1], source, lineno)))
    high = set()
    for lineno, tokens in _need(sections, "high_value", source):
        high.add(_to_int(tokens[0], source, lineno))
    probs = [1.0] * hosts
    for lineno, tokens in _need(sections, "exploit_prob", source):
        probs[_to_int(tokens[0], source, lineno)] = _to_float(tokens[1], source, lineno)
    return NetworkTopology(hosts, tuple(subnets), frozenset(edges), frozenset(high),
                           tuple(probs), int(head["entry_host"]))


# -- payoff matrix -------------------------------------------------------------


def _meta_tokens(meta: PolicyMetadata) -> str:
    return (f"oracle={meta.oracle} iteration={meta.iteration} "
            f"ptm={str(meta.ptm_initialized).lower()} "
            f"shaped={str(meta.shaped).lower()}")


def _parse_meta(tokens: list[str], source: str, lineno: int) -> PolicyMetadata:
    fields = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(source, lineno, f"expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        fields[key] = value
    return PolicyMetadata(
        oracle=fields.get("oracle", "manual"),
        iteration=int(fields.get("iteration", "0")),
        ptm_initialized=fields.get("ptm", "false") == "true",
        shaped=fields.get("shaped", "false") == "true",
    )


def write_matrix(payoff: np.ndarray, blue_meta: list[PolicyMetadata] | None = None,
                 red_meta: list[PolicyMetadata] | None = None) -> str:
    payoff = np.asarray(payoff, dtype=np.float64)
    rows, cols = payoff.shape
    lines = ["# empirical payoff matrix (entries are Blue's gain)", "[matrix]",
             f"rows = {rows}", f"cols = {cols}"]
    if blue_meta is not None:
        lines.append("[blue_registry]")
        lines += [f"{i} {_meta_tokens(m)}" for i, m in enumerate(blue_meta)]
    if red_meta is not None:
        lines.append("[red_registry]")
        lines += [f"{j} {_meta_tokens(m)}" for j, m in enumerate(red_meta)]
    lines.append("[entries]")
    for i in range(rows):
        lines.append(" ".join(fmt_exact(x) for x in payoff[i]))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, source: str = "<matrix>",
                 ) -> tuple[np.ndarray, list[PolicyMetadata], list[PolicyMetadata]]:
    sections = _read_sections(text, source)
    head = _kv(_need(sections, "matrix", source), source)
    rows, cols = int(head["rows"]), int(head["cols"])
    payoff = np.zeros((rows, cols))
    entry_rows = _need(sections, "entries", source)
    if len(entry_rows) != rows:
        raise ParseError(source, 0, f"expected {rows} entry rows, got {len(entry_rows)}")
    for i, (lineno, tokens) in enumerate(entry_rows):
        if len(tokens) != cols:
            raise ParseError(source, lineno, f"expected {cols} entries in row {i}")
        payoff[i] = [_to_float(x, source, lineno) for x in tokens]

    def registry(name: str, count: int) -> list[PolicyMetadata]:
        out = [PolicyMetadata() for _ in range(count)]
        for lineno, tokens in sections.get(name, []):
            idx = _to_int(tokens[0], source, lineno)
            if not 0 <= idx < count:
                raise ParseError(source, lineno, f"registry index {idx} out of range")
            out[idx] = _parse_meta(tokens[1:], source, lineno)
        return out

    return payoff, registry("blue_registry", rows), registry("red_registry", cols)


# -- mixtures ------------------------------------------------------------------


def write_mixtures(result: SolveResult) -> str:
    lines = ["# minimax solution", "[solve]",
             f"value = {fmt_exact(result.value)}",
             f"solver_tolerance = {fmt_exact(result.solver_tolerance)}",
             "[blue_mixture]"]
    lines += [f"{i} {fmt_exact(w)}" for i, w in enumerate(result.blue_mixture.weights)]
    lines.append("[red_mixture]")
    lines += [f"{j} {fmt_exact(w)}" for j, w in enumerate(result.red_mixture.weights)]
    return "\n".join(lines) + "\n"


def parse_mixtures(text: str, source: str = "<mixtures>") -> SolveResult:
    sections = _read_sections(text, source)
    head = _kv(_need(sections, "solve", source), source)

    def weights(name: str, player: str) -> Mixture:
        rows = _need(sections, name, source)
        vec = np.zeros(len(rows))
        for lineno, tokens in rows:
            vec[_to_int(tokens[0], source, lineno)] = _to_float(tokens[1], source, lineno)
        return Mixture(vec, player)

    return SolveResult(weights("blue_mixture", "blue"), weights("red_mixture", "red"),
                       float(head["value"]), float(head["solver_tolerance"]))


# -- value tables and learning curves ------------------------------------------


def write_value_table(vf: ValueFunctionTable) -> str:
    lines = ["[value_function]",
             f"oracle = {vf.origin[0]}",
             f"iteration = {vf.origin[1]}",
             "[values]"]
    lines += [f"{s} {fmt_exact(v)}" for s, v in enumerate(vf.values)]
    return "\n".join(lines) + "\n"


def parse_value_table(text: str, source: str = "<values>") -> ValueFunctionTable:
    sections = _read_sections(text, source)
    head = _kv(_need(sections, "value_function", source), source)
    rows = _need(sections, "values", source)
    values = np.zeros(len(rows))
    for lineno, tokens in rows:
        values[_to_int(tokens[0], source, lineno)] = _to_float(tokens[1], source, lineno)
    return ValueFunctionTable(values, (head.get("oracle", "manual"),
                                       int(head.get("iteration", "0"))))


def write_learning_curve(curve: list[tuple[int, float]]) -> str:
    lines = ["step,greedy_gain"]
    lines += [f"{step},{fmt_float(gain)}" for step, gain in curve]
    return "\n".join(lines) + "\n"


# -- convergence CSV -------------------------------------------------------------


def convergence_header(blue_oracle_count: int, red_oracle_count: int) -> str:
    cols = ["iteration"]
    cols += [f"blue_gain_{i}" for i in range(blue_oracle_count)]
    cols += [f"red_gain_{j}" for j in range(red_oracle_count)]
    cols += ["blue_best_gain", "red_best_gain", "value", "exploitability",
             "new_cells", "cumulative_evaluations", "epsilon_ptm"]
    return ",".join(cols)


def write_convergence_csv(trace: RunTrace) -> str:
    if not trace.records:
        return convergence_header(0, 0) + "\n"
    first = trace.records[0]
    lines = [convergence_header(len(first.blue_gains), len(first.red_gains))]
    for rec in trace.records:
        cells = [str(rec.iteration)]
        cells += [fmt_float(g) for g in rec.blue_gains]
        cells += [fmt_float(g) for g in rec.red_gains]
        cells += [fmt_float(rec.blue_best_gain), fmt_float(rec.red_best_gain),
                  fmt_float(rec.value), fmt_float(rec.exploitability),
                  str(rec.new_cells), str(rec.cumulative_evaluations),
                  "" if rec.epsilon_ptm is None else fmt_float(rec.epsilon_ptm)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
