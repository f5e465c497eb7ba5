"""
Instance text format, JSON export and random generation
"""
import json
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from models.hst import Hst, HstError
from models.instance import (
    Instance,
    ParamSet,
    Request,
    ParseError,
    ParamViolation,
    DuplicateTime,
    DummyRequest,
)
from services.hst_builder import NodeRecord, add_dummy_leaves, build_hst

logger = logging.getLogger(__name__)

PARAM_NAMES = ("delta_prime", "delta", "gamma", "m", "count_dummies", "subtree_measure")

RequestSpec = Tuple[str, int, int]
WindowLaw = Callable[[np.random.Generator], int]


def parse_instance(text: str) -> Instance:
    """
    Parse the instance grammar

        hst <lambda>
        node <id> <parent-id|-> <level>     (one or more)
        k <int>
        param <name> <value>                (optional, any number)
        request <leaf> <b> <e>              (any number)

    Blank lines and lines starting with '#' are ignored.

    Raises:
        ParseError: With the offending line number
        ParamViolation: When a parameter inequality fails
        DuplicateTime: When arrival/deadline times repeat
    """
    lam: Optional[float] = None
    records: List[NodeRecord] = []
    k: Optional[int] = None
    overrides: Dict[str, str] = {}
    requests: List[RequestSpec] = []
    request_lines: List[int] = []

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        keyword = tokens[0]

        if lam is None:
            if keyword != "hst":
                raise ParseError(number, f"expected 'hst <lambda>', got {keyword!r}")
            _expect_arity(tokens, 2, number)
            lam = _to_float(tokens[1], number, "lambda")
        elif keyword == "node":
            if k is not None:
                raise ParseError(number, "node records must precede 'k'")
            _expect_arity(tokens, 4, number)
            parent = None if tokens[2] == "-" else tokens[2]
            records.append((tokens[1], parent, _to_int(tokens[3], number, "level")))
        elif keyword == "k":
            if k is not None:
                raise ParseError(number, "'k' given twice")
            if not records:
                raise ParseError(number, "'k' before any node record")
            _expect_arity(tokens, 2, number)
            k = _to_int(tokens[1], number, "k")
            if k < 1:
                raise ParseError(number, f"k must be at least 1, got {k}")
        elif keyword == "param":
            if k is None:
                raise ParseError(number, "'param' before 'k'")
            _expect_arity(tokens, 3, number)
            if tokens[1] not in PARAM_NAMES:
                raise ParseError(number, f"unknown parameter {tokens[1]!r}")
            if tokens[1] in overrides:
                raise ParseError(number, f"parameter {tokens[1]!r} given twice")
            overrides[tokens[1]] = tokens[2]
        elif keyword == "request":
            if k is None:
                raise ParseError(number, "'request' before 'k'")
            _expect_arity(tokens, 4, number)
            b = _to_int(tokens[2], number, "b")
            e = _to_int(tokens[3], number, "e")
            if b < 1 or e < b:
                raise ParseError(number, f"invalid window [{b}, {e}]")
            requests.append((tokens[1], b, e))
            request_lines.append(number)
        else:
            raise ParseError(number, f"unknown record {keyword!r}")

    if lam is None:
        raise ParseError(0, "empty instance")
    if k is None:
        raise ParseError(0, "missing 'k' record")

    try:
        tree = build_hst(records, lam)
    except HstError as e:
        raise ParseError(1, f"invalid tree: {e}") from e

    for (leaf, _, _), number in zip(requests, request_lines):
        if leaf not in tree or tree.children(leaf):
            raise ParseError(number, f"request at {leaf!r}, which is not a leaf")

    return assemble_instance(tree, k, requests, overrides)


def assemble_instance(
    tree: Hst,
    k: int,
    requests: Sequence[RequestSpec],
    overrides: Optional[Dict[str, str]] = None,
) -> Instance:
    """
    Attach dummies, validate requests and derive parameters

    Args:
        tree: Tree without dummy leaves
        k: Number of servers
        requests: (leaf, b, e) triples
        overrides: Parameter strings keyed by name (see PARAM_NAMES)

    Returns:
        Validated Instance

    Raises:
        DummyRequest: Request at a dummy or non-leaf node
        DuplicateTime: Arrival and deadline times are not globally distinct
        ParamViolation: A parameter inequality fails
    """
    overrides = dict(overrides or {})
    hst = add_dummy_leaves(tree, k)

    seen: Dict[int, str] = {}
    for leaf, b, e in requests:
        if leaf not in tree or tree.children(leaf) or hst.node(leaf).is_dummy:
            raise DummyRequest(f"Request at {leaf!r} does not target a real leaf")
        for t in (b, e):
            if t in seen:
                raise DuplicateTime(f"Time {t} used by {seen[t]} and request at {leaf!r}")
            seen[t] = f"request at {leaf!r}"

    ordered = sorted(requests, key=lambda spec: spec[1])
    built = [Request(rid=i, leaf=leaf, b=b, e=e) for i, (leaf, b, e) in enumerate(ordered)]
    time_windows = any(not r.is_unit_window for r in built)
    params = derive_params(hst, time_windows, overrides)

    return Instance(
        tree=tree,
        hst=hst,
        k=k,
        requests=built,
        params=params,
        overrides=overrides,
    )


def derive_params(hst: Hst, time_windows: bool, overrides: Dict[str, str]) -> ParamSet:
    """Defaults from n and Δ, then overrides, then the inequality checks"""
    count_dummies = settings.COUNT_DUMMIES_IN_N
    measure = settings.SUBTREE_MEASURE
    if "count_dummies" in overrides:
        count_dummies = _to_bool(overrides["count_dummies"])
    if "subtree_measure" in overrides:
        measure = overrides["subtree_measure"]
        if measure not in ("nodes", "leaves"):
            raise ParamViolation("subtree_measure ∈ {nodes, leaves}", measure)

    n = hst.total_measure(measure, count_dummies)
    aspect = hst.aspect_ratio()
    params = ParamSet.defaults(n, time_windows, aspect, count_dummies, measure)

    update: Dict[str, float] = {}
    for name, field in (("delta_prime", "delta_prime"), ("delta", "delta"), ("gamma", "gamma"), ("m", "m_override")):
        if name in overrides:
            value = _to_number(overrides[name], name)
            if value <= 0:
                raise ParamViolation(f"{name} > 0", overrides[name])
            update[field] = value
    if update:
        params = ParamSet(**{**params.model_dump(), **update})
    if params.delta_prime >= 1:
        raise ParamViolation("δ′ < 1", repr(params.delta_prime))

    params.check(n, time_windows, aspect)
    return params


def with_overrides(instance: Instance, extra: Dict[str, str]) -> Instance:
    """Re-validate an instance with additional parameter overrides"""
    for name in extra:
        if name not in PARAM_NAMES:
            raise ParamViolation(f"known parameter name ({', '.join(PARAM_NAMES)})", name)
    merged = {**instance.overrides, **extra}
    specs = [(r.leaf, r.b, r.e) for r in instance.requests]
    return assemble_instance(instance.tree, instance.k, specs, merged)


def render_instance(instance: Instance) -> str:
    """Text form that parses back to an identical instance"""
    lines = [f"hst {instance.tree.lam!r}"]
    for node_id, parent, level in instance.tree.records():
        lines.append(f"node {node_id} {parent if parent is not None else '-'} {level}")
    lines.append(f"k {instance.k}")
    for name, value in instance.overrides.items():
        lines.append(f"param {name} {value}")
    for request in instance.requests:
        lines.append(f"request {request.leaf} {request.b} {request.e}")
    return "\n".join(lines) + "\n"


def instance_to_json(instance: Instance) -> str:
    """JSON export mirroring the text fields"""
    payload = {
        "lambda": instance.tree.lam,
        "nodes": [
            {"id": node_id, "parent": parent, "level": level}
            for node_id, parent, level in instance.tree.records()
        ],
        "k": instance.k,
        "overrides": instance.overrides,
        "params": instance.params.model_dump(),
        "requests": [request.model_dump() for request in instance.requests],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False)


def parse_window_law(spec: str) -> WindowLaw:
    """
    Window-length law from a flag value

    Supported: ``const:L``, ``uniform:a:b`` (inclusive), ``geom:p`` (1 + geometric).
    """
    parts = spec.split(":")
    try:
        if parts[0] == "const" and len(parts) == 2:
            length = int(parts[1])
            if length < 1:
                raise ValueError
            return lambda rng: length
        if parts[0] == "uniform" and len(parts) == 3:
            low, high = int(parts[1]), int(parts[2])
            if not 1 <= low <= high:
                raise ValueError
            return lambda rng: int(rng.integers(low, high + 1))
        if parts[0] == "geom" and len(parts) == 2:
            p = float(parts[1])
            if not 0 < p <= 1:
                raise ValueError
            return lambda rng: int(rng.geometric(p))
    except ValueError:
        pass
    raise ValueError(f"Invalid window law {spec!r}")


def generate_random(
    tree: Hst,
    k: int,
    num_requests: int,
    window_law: WindowLaw,
    seed: int,
    overrides: Optional[Dict[str, str]] = None,
) -> Instance:
    """
    Random request stream over the real leaves of a tree

    Arrivals are strictly increasing with gaps of 2 or 3; deadlines are b plus a
    length drawn from window_law, bumped forward until every time is distinct.

    Args:
        tree: Tree without dummy leaves
        k: Number of servers
        num_requests: Stream length
        window_law: Window length sampler (see parse_window_law)
        seed: Seed for numpy's default generator
        overrides: Parameter overrides

    Returns:
        Validated Instance
    """
    leaves = tree.real_leaves
    if not leaves:
        raise DummyRequest("Tree has no real leaf to request")
    rng = np.random.default_rng(seed)
    used = set()
    specs: List[RequestSpec] = []
    arrival = 1
    for _ in range(num_requests):
        while arrival in used:
            arrival += 1
        leaf = leaves[int(rng.integers(0, len(leaves)))]
        deadline = arrival + window_law(rng)
        while deadline in used or deadline == arrival:
            deadline += 1
        used.update((arrival, deadline))
        specs.append((leaf, arrival, deadline))
        arrival += int(rng.integers(2, 4))

    logger.info(f"Generated {num_requests} requests over {len(leaves)} leaves (seed={seed})")
    return assemble_instance(tree, k, specs, overrides)


def _expect_arity(tokens: List[str], arity: int, number: int) -> None:
    if len(tokens) != arity:
        raise ParseError(number, f"expected {arity} fields, got {len(tokens)}")


def _to_int(token: str, number: int, what: str) -> int:
    try:
        return int(token)
    except ValueError as e:
        raise ParseError(number, f"{what} must be an integer, got {token!r}") from e


def _to_float(token: str, number: int, what: str) -> float:
    try:
        return float(token)
    except ValueError as e:
        raise ParseError(number, f"{what} must be a number, got {token!r}") from e


def _to_number(token: str, name: str) -> float:
    try:
        return float(token)
    except ValueError as e:
        raise ParamViolation(f"{name} is numeric", token) from e


def _to_bool(token: str) -> bool:
    lowered = token.lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise ParamViolation("count_dummies ∈ {0, 1}", token)
