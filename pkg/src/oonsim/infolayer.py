"""Discovery network of Information Relay Nodes.

The per-class multi-attribute namespace is cut into lexicographic
segments per dimension; the resulting grid cells are assigned round-robin
to relay nodes.  Requests (xFind) are routed greedily over the grid using
nothing but the static partition map, and responses (Results) walk the
recorded path back to the issuing node.  No routing state is ever
exchanged between nodes.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .model import (
    AccessPolicy,
    InformationalForm,
    ObjectClass,
    OonError,
    Query,
    eval_query,
    iname_key,
    predicate_interval,
    validate_form,
    validate_query,
)
from .sim import EventLoop, Metrics, Trace


class InvalidCuts(OonError):
    pass


class HopLimitExceeded(OonError):
    pass


class WrongOwner(OonError):
    pass


class InvalidPayload(OonError):
    pass


class UnknownRequest(OonError):
    pass


class Action(Enum):
    FIND = "find"
    REGISTER = "register"
    MODIFY = "modify"
    DELETE = "delete"


@dataclass(frozen=True)
class SegmentCuts:
    """Per-attribute sorted boundary keys; k boundaries make k+1 segments."""

    per_attribute: tuple  # tuple of (attribute, tuple of boundary keys)

    def __post_init__(self):
        per = self.per_attribute
        if isinstance(per, dict):
            per = tuple((n, tuple(c)) for n, c in per.items())
        else:
            per = tuple((n, tuple(c)) for n, c in per)
        object.__setattr__(self, "per_attribute", per)

    def cuts_for(self, attribute: str) -> tuple:
        for name, cuts in self.per_attribute:
            if name == attribute:
                return cuts
        return ()


@dataclass(frozen=True)
class Requester:
    """Summary of the requesting object carried on every request."""

    class_name: str
    label: str = ""


@dataclass
class IRNNode:
    irn_id: int
    owned: set = field(default_factory=set)          # grid coordinates
    store: dict = field(default_factory=dict)        # normalized key -> form
    neighbors: set = field(default_factory=set)      # adjacent node ids


@dataclass
class PartitionMap:
    """Static cell-to-node assignment over the segment grid of one class."""

    cls: ObjectClass
    dim_cuts: tuple     # per defining attribute, sorted boundary keys
    dims: tuple         # per-attribute segment counts
    irn_count: int
    assignment: dict    # coordinate -> node id

    @property
    def class_name(self) -> str:
        return self.cls.class_name

    def cells(self):
        return itertools.product(*(range(n) for n in self.dims))

    def cell_of_key(self, key: tuple) -> tuple:
        return tuple(bisect_right(cuts, k) for cuts, k in zip(self.dim_cuts, key))

    def cell_of_iname(self, iname) -> tuple:
        return self.cell_of_key(iname_key(self.cls, iname))

    def max_hops(self) -> int:
        """Greedy forwarding never needs more hops than this."""
        return sum(n - 1 for n in self.dims)


def build_partition_map(cls: ObjectClass, cuts: SegmentCuts, irn_count: int):
    """Create the partition map and its relay nodes.

    Cells are assigned round-robin in row-major order; node neighbor sets
    come from grid adjacency of their cells.
    """
    if irn_count < 1:
        raise ValueError("irn_count must be >= 1")
    dim_cuts = []
    for name, _ in cls.defining_attributes:
        c = cuts.cuts_for(name)
        if any(c[i] >= c[i + 1] for i in range(len(c) - 1)):
            raise InvalidCuts(f"boundaries for {name!r} not strictly increasing")
        dim_cuts.append(tuple(c))
    for name, _ in cuts.per_attribute:
        cls.kind_of(name)  # raises UnknownAttribute for undeclared names
    dims = tuple(len(c) + 1 for c in dim_cuts)

    assignment = {}
    for idx, coord in enumerate(itertools.product(*(range(n) for n in dims))):
        assignment[coord] = idx % irn_count
    pmap = PartitionMap(cls, tuple(dim_cuts), dims, irn_count, assignment)

    nodes = [IRNNode(i) for i in range(irn_count)]
    for coord, nid in assignment.items():
        nodes[nid].owned.add(coord)
    for coord, nid in assignment.items():
        for adj in _adjacent(coord, dims):
            other = assignment[adj]
            if other != nid:
                nodes[nid].neighbors.add(other)
    return pmap, nodes


def _adjacent(coord, dims):
    for d in range(len(coord)):
        for step in (-1, 1):
            v = coord[d] + step
            if 0 <= v < dims[d]:
                yield coord[:d] + (v,) + coord[d + 1:]


def locate_partitions(pmap: PartitionMap, q: Query) -> frozenset:
    """Exactly the cells whose segments intersect the query's key intervals."""
    validate_query(q, pmap.cls)
    per_dim = []
    for (name, kind), cuts in zip(pmap.cls.defining_attributes, pmap.dim_cuts):
        lo, hi, hi_open = predicate_interval(q.predicate_for(name), kind)
        i_lo = bisect_right(cuts, lo) if lo is not None else 0
        if hi is None:
            i_hi = len(cuts)
        elif hi_open:
            i_hi = bisect_left(cuts, hi)
        else:
            i_hi = bisect_right(cuts, hi)
        per_dim.append(range(i_lo, i_hi + 1))
    return frozenset(itertools.product(*per_dim))


# --- messages ----------------------------------------------------------------


@dataclass(frozen=True)
class XFindMessage:
    request_id: int
    action: Action
    payload: object              # Query for FIND, InformationalForm otherwise
    origin: int                  # issuing node id
    requester: Requester
    timestamp: int
    targets: frozenset           # grid coordinates still to serve
    path: tuple = ()             # node ids visited before the current one
    hop_limit: int = 64


@dataclass(frozen=True)
class ResultsMessage:
    request_id: int
    responder: int
    reverse_path: tuple          # remaining hops back to the origin
    forward_path: tuple          # full path the xfind took (instrumentation)
    forms: tuple = ()
    ack: Optional[bool] = None
    detail: str = ""


def check_access(form: InformationalForm, requester: Requester, action: str) -> bool:
    """Evaluate the form's own policy against the requester's class."""
    rule = form.policy.view_rule if action == "view" else form.policy.exchange_rule
    return rule.allows(requester.class_name)


def next_hops(node: IRNNode, pmap: PartitionMap, msg: XFindMessage, targets) -> list:
    """Greedy split of non-local targets over grid neighbors.

    Each target is routed via the first dimension with a nonzero delta from
    the node's nearest owned cell, so the grid distance strictly decreases
    every hop.  Targets sharing a next hop are batched.
    """
    remaining = [t for t in sorted(targets) if t not in node.owned]
    if not remaining:
        return []
    if msg.hop_limit <= 0:
        raise HopLimitExceeded(f"request {msg.request_id} out of hops at node {node.irn_id}")
    groups = {}
    for t in remaining:
        cell = min(sorted(node.owned),
                   key=lambda c: sum(abs(a - b) for a, b in zip(c, t)))
        for d in range(len(cell)):
            if cell[d] != t[d]:
                step = cell[:d] + (cell[d] + (1 if t[d] > cell[d] else -1),) + cell[d + 1:]
                break
        groups.setdefault(pmap.assignment[step], set()).add(t)
    return [(nid, frozenset(groups[nid])) for nid in sorted(groups)]


def handle_xfind(node: IRNNode, pmap: PartitionMap, msg: XFindMessage):
    """Serve the locally owned targets and split the rest over neighbors.

    Returns (results message or None, list of forwarded messages).
    """
    assert node.irn_id not in msg.path, "xfind revisited a node"
    cls = pmap.cls
    local = msg.targets & node.owned
    results = None
    if local:
        if msg.action is Action.FIND:
            matched = []
            for key in sorted(node.store):
                form = node.store[key]
                if eval_query(msg.payload, form, cls) and check_access(form, msg.requester, "view"):
                    form.management["hits"] = form.management.get("hits", 0) + 1
                    matched.append(form)
            results = _results(node, msg, forms=tuple(matched))
        else:
            form = msg.payload
            cell = pmap.cell_of_iname(form.iname)
            if cell not in node.owned:
                raise WrongOwner(
                    f"{msg.action.value} for cell {cell} routed to node {node.irn_id}")
            key = iname_key(cls, form.iname)
            exists = key in node.store
            if msg.action is Action.REGISTER:
                if exists:
                    results = _results(node, msg, ack=False, detail="AlreadyExists")
                else:
                    node.store[key] = form
                    results = _results(node, msg, ack=True, detail="Registered")
            elif msg.action is Action.MODIFY:
                if exists:
                    node.store[key] = form
                    results = _results(node, msg, ack=True, detail="Modified")
                else:
                    results = _results(node, msg, ack=False, detail="NotFound")
            else:  # DELETE
                if exists:
                    del node.store[key]
                    results = _results(node, msg, ack=True, detail="Deleted")
                else:
                    results = _results(node, msg, ack=False, detail="NotFound")
    forwards = []
    for nid, sub in next_hops(node, pmap, msg, msg.targets - node.owned):
        forwards.append((nid, replace(msg,
                                      targets=sub,
                                      path=msg.path + (node.irn_id,),
                                      hop_limit=msg.hop_limit - 1)))
    return results, forwards


def _results(node, msg, forms=(), ack=None, detail=""):
    return ResultsMessage(
        request_id=msg.request_id,
        responder=node.irn_id,
        reverse_path=tuple(reversed(msg.path)),
        forward_path=msg.path + (node.irn_id,),
        forms=forms,
        ack=ack,
        detail=detail,
    )


# --- request accounting at the issuing node ----------------------------------


@dataclass
class RequestState:
    request_id: int
    action: Action
    entry: int
    expected: frozenset          # node ids that must respond
    issued_at: int
    responded: set = field(default_factory=set)
    forms: list = field(default_factory=list)
    ack: Optional[bool] = None
    detail: str = ""
    status: str = "pending"      # pending | complete | timeout | failed
    completed_at: Optional[int] = None
    deadline_handle: Optional[tuple] = None


@dataclass(frozen=True)
class _Deadline:
    request_id: int


class InfoNetwork:
    """One class's relay network wired to the event loop.

    Holds the partition map, the nodes, and the per-request accounting at
    issuing nodes.  All message passing goes through the shared loop, one
    event per inter-node transmission.
    """

    def __init__(self, cls: ObjectClass, cuts: SegmentCuts, irn_count: int,
                 loop: EventLoop, trace: Trace, metrics: Metrics,
                 latency: int = 1, deadline: int = 1000, hop_limit: int = 64):
        self.cls = cls
        self.pmap, self.nodes = build_partition_map(cls, cuts, irn_count)
        self.loop = loop
        self.trace = trace
        self.metrics = metrics
        self.latency = latency
        self.deadline = deadline
        self.hop_limit = hop_limit
        self.requests = {}
        self._next_request = 1
        for node in self.nodes:
            loop.register(self._target(node.irn_id),
                          lambda payload, n=node: self._handle(n, payload))

    def _target(self, nid: int) -> str:
        return f"{self.cls.class_name}:irn{nid}"

    # -- issuing --------------------------------------------------------------

    def issue_request(self, entry: int, action: Action, payload,
                      requester: Requester) -> int:
        """Validate, register expected-response accounting, send the xfind."""
        if action is Action.FIND:
            if not isinstance(payload, Query):
                raise InvalidPayload("find expects a query")
            targets = locate_partitions(self.pmap, payload)
        else:
            if not isinstance(payload, InformationalForm):
                raise InvalidPayload(f"{action.value} expects an informational form")
            violations = validate_form(payload, self.cls)
            if violations:
                raise InvalidPayload("; ".join(violations))
            targets = frozenset({self.pmap.cell_of_iname(payload.iname)})
        expected = frozenset(self.pmap.assignment[c] for c in targets)
        rid = self._next_request
        self._next_request += 1
        rec = RequestState(rid, action, entry, expected, self.loop.now)
        self.requests[rid] = rec
        msg = XFindMessage(
            request_id=rid, action=action, payload=payload, origin=entry,
            requester=requester, timestamp=self.loop.now, targets=targets,
            hop_limit=self.hop_limit)
        self.metrics.sent["xfind"] += 1
        self.loop.post(0, self._target(entry), msg)
        rec.deadline_handle = self.loop.post(self.deadline, self._target(entry),
                                             _Deadline(rid))
        return rid

    def request(self, rid: int) -> RequestState:
        if rid not in self.requests:
            raise UnknownRequest(f"request {rid}")
        return self.requests[rid]

    # -- node handlers --------------------------------------------------------

    def _handle(self, node: IRNNode, payload) -> None:
        if isinstance(payload, XFindMessage):
            self._on_xfind(node, payload)
        elif isinstance(payload, ResultsMessage):
            self._on_results(node, payload)
        elif isinstance(payload, _Deadline):
            self._on_deadline(payload.request_id)

    def _on_xfind(self, node: IRNNode, msg: XFindMessage) -> None:
        self.trace.log(f"XFIND {msg.action.value} req={msg.request_id} "
                       f"at=irn{node.irn_id} targets={_fmt_cells(msg.targets)}")
        try:
            results, forwards = handle_xfind(node, self.pmap, msg)
        except HopLimitExceeded:
            self.metrics.dropped["xfind"] += 1
            self.metrics.drops_by_cause["hop_limit"] += 1
            self._send_results(node, _results(node, msg, ack=False,
                                              detail="hop_limit_exceeded"))
            return
        self.metrics.delivered["xfind"] += 1
        self.metrics.xfind_hops.append(len(msg.path))
        if results is not None:
            self._send_results(node, results)
        for nid, fwd in forwards:
            self.metrics.sent["xfind"] += 1
            self.loop.post(self.latency, self._target(nid), fwd)

    def _send_results(self, node: IRNNode, rmsg: ResultsMessage) -> None:
        self.metrics.sent["results"] += 1
        self.trace.log(f"RESULTS req={rmsg.request_id} at=irn{node.irn_id} "
                       f"{_fmt_results(rmsg)}")
        if rmsg.reverse_path:
            nxt = rmsg.reverse_path[0]
            self.loop.post(self.latency, self._target(nxt),
                           replace(rmsg, reverse_path=rmsg.reverse_path[1:]))
        else:
            self._deliver_results(rmsg)

    def _on_results(self, node: IRNNode, rmsg: ResultsMessage) -> None:
        self.trace.log(f"RESULTS req={rmsg.request_id} at=irn{node.irn_id} "
                       f"{_fmt_results(rmsg)}")
        if rmsg.reverse_path:
            nxt = rmsg.reverse_path[0]
            self.loop.post(self.latency, self._target(nxt),
                           replace(rmsg, reverse_path=rmsg.reverse_path[1:]))
        else:
            self._deliver_results(rmsg)

    def _deliver_results(self, rmsg: ResultsMessage) -> None:
        self.metrics.delivered["results"] += 1
        self.gather_results(rmsg)

    # -- origin-side accounting ----------------------------------------------

    def gather_results(self, rmsg: ResultsMessage) -> RequestState:
        """Fold one results message into its request; dedupes per responder."""
        rec = self.request(rmsg.request_id)
        if rmsg.detail == "hop_limit_exceeded":
            if rec.status == "pending":
                rec.status = "failed"
                rec.detail = rmsg.detail
                rec.completed_at = self.loop.now
                self._cancel_deadline(rec)
            return rec
        if rmsg.responder in rec.responded:
            return rec
        rec.responded.add(rmsg.responder)
        rec.forms.extend(rmsg.forms)
        if rmsg.ack is not None:
            rec.ack = rmsg.ack
            rec.detail = rmsg.detail
        if rec.status == "pending" and rec.responded >= rec.expected:
            rec.status = "complete"
            rec.completed_at = self.loop.now
            self.metrics.query_latency.append(rec.completed_at - rec.issued_at)
            self._cancel_deadline(rec)
        return rec

    def _cancel_deadline(self, rec: RequestState) -> None:
        if rec.deadline_handle is not None:
            self.loop.cancel(rec.deadline_handle)
            rec.deadline_handle = None

    def _on_deadline(self, rid: int) -> None:
        rec = self.requests.get(rid)
        if rec is not None and rec.status == "pending":
            rec.status = "timeout"
            rec.completed_at = self.loop.now

    # -- inspection -----------------------------------------------------------

    def all_forms(self) -> list:
        forms = []
        for node in self.nodes:
            for key in sorted(node.store):
                forms.append(node.store[key])
        return forms

    def store_sizes(self) -> list:
        return [len(n.store) for n in self.nodes]


def _fmt_cells(cells) -> str:
    return "|".join("(" + ",".join(str(x) for x in c) + ")" for c in sorted(cells))


def _fmt_results(rmsg: ResultsMessage) -> str:
    if rmsg.ack is None:
        return f"forms={len(rmsg.forms)}"
    return f"ack={'yes' if rmsg.ack else 'no'} detail={rmsg.detail}"
