"""End-to-end object procedures spanning both layers.

The World wires the authority, the data-layer domains and the per-class
discovery networks onto one event loop, and runs instantiate, publish,
discover, migrate and the cross-layer consistency audit as discrete
scripted steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .datalayer import (
    DataNetwork,
    ObjectHost,
    SessionTrace,
    UnknownDomain,
    run_interactive,
    run_pull,
    run_push,
)
from .infolayer import Action, InfoNetwork, Requester, SegmentCuts
from .model import (
    AccessPolicy,
    IName,
    InformationalForm,
    ObjectClass,
    OPEN_POLICY,
    OonError,
    PName,
    Query,
    iname_key,
    make_form,
    normalize_value,
)
from .naming import Authority, LocalAllocator
from .sim import EventLoop, Metrics, Trace


class AlreadyPublished(OonError):
    pass


class NotInstantiated(OonError):
    pass


class UnknownObject(OonError):
    pass


@dataclass
class ObjectSpec:
    """Everything needed to create and publish one object."""

    obj_id: str
    class_name: str
    values: dict
    domain: str
    policy: AccessPolicy = OPEN_POLICY
    entry_irn: int = 0


@dataclass
class _Record:
    spec: ObjectSpec
    pname: Optional[PName] = None
    host: Optional[ObjectHost] = None
    form: Optional[InformationalForm] = None
    published: bool = False


@dataclass
class DiscoveryResult:
    items: list          # (IName, tuple of PName) sorted by normalized keys
    complete: bool       # False when the request timed out (partial results)
    request: object


@dataclass
class AuditReport:
    dangling: list       # (IName, PName) pointers with no live host
    orphans: list        # hosted pnames with no covering informational form


class World:
    """One simulation universe: naming, both layers, object registry."""

    def __init__(self, pname_assigner: str = "data_domain",
                 info_latency: int = 1, deadline: int = 1000):
        if pname_assigner not in ("data_domain", "info_domain"):
            raise ValueError(f"bad pname_assigner {pname_assigner!r}")
        self.pname_assigner = pname_assigner
        self.info_latency = info_latency
        self.deadline = deadline
        self.loop = EventLoop()
        self.trace = Trace(self.loop)
        self.metrics = Metrics()
        self.authority = Authority()
        self.datanet = DataNetwork(self.loop, self.trace, self.metrics,
                                   resolver=self._class_of)
        self.classes = {}
        self.info = {}               # class name -> InfoNetwork
        self.registry = {}           # obj id -> _Record
        self._by_pname = {}          # PName -> class name
        self._allocators = {}        # domain name -> LocalAllocator
        self._installed = {}         # global id -> owner domain

    # -- topology -------------------------------------------------------------

    def add_class(self, cls: ObjectClass) -> None:
        self.classes[cls.class_name] = cls

    def add_domain(self, name: str) -> None:
        self.datanet.add_domain(name)
        authority_key = "info-layer" if self.pname_assigner == "info_domain" else name
        self._allocators[name] = self.authority.new_allocator(authority_key)

    def connect_domains(self, a: str, b: str, latency: int = 1) -> None:
        self.datanet.link(a, b, latency)

    def add_partition(self, class_name: str, cuts, irn_count: int) -> InfoNetwork:
        cls = self.classes[class_name]
        if not isinstance(cuts, SegmentCuts):
            cuts = SegmentCuts(cuts)
        net = InfoNetwork(cls, cuts, irn_count, self.loop, self.trace,
                          self.metrics, latency=self.info_latency,
                          deadline=self.deadline)
        self.info[class_name] = net
        return net

    # -- object lifecycle -----------------------------------------------------

    def add_object(self, spec: ObjectSpec) -> None:
        self.registry[spec.obj_id] = _Record(spec)

    def record(self, obj_id: str) -> _Record:
        if obj_id not in self.registry:
            raise UnknownObject(f"{obj_id!r}")
        return self.registry[obj_id]

    def instantiate(self, obj_id: str):
        """Mint a pname, create the host, install routes to its domain."""
        rec = self.record(obj_id)
        spec = rec.spec
        if spec.domain not in self.datanet.domains:
            raise UnknownDomain(f"{spec.domain!r}")
        cls = self.classes[spec.class_name]
        for name in cls.defining_names:
            normalize_value(spec.values[name], cls.kind_of(name))
        pname = self._allocators[spec.domain].mint_pname()
        host = ObjectHost(pname, spec.class_name, cls.methods, spec.policy)
        self.datanet.add_host(spec.domain, host)
        self._route(pname.global_id, spec.domain)
        self._by_pname[pname] = spec.class_name
        rec.pname, rec.host = pname, host
        return host, pname

    def _route(self, global_id: int, owner: str) -> None:
        if self._installed.get(global_id) != owner:
            self.datanet.install_routes(global_id, owner)
            self._installed[global_id] = owner

    def publish(self, obj_id: str, order: str = "bottom_up") -> str:
        """Create the informational form at its owning relay node.

        bottom_up registers an already instantiated object with its pname
        in the relationship list; top_down registers first, instantiates on
        affirmation, then fills the pointer in with a modify.
        """
        rec = self.record(obj_id)
        spec = rec.spec
        cls = self.classes[spec.class_name]
        if order == "bottom_up":
            if rec.host is None:
                raise NotInstantiated(f"{obj_id!r} must be instantiated first")
            relationship = [rec.pname]
        elif order == "top_down":
            relationship = []
        else:
            raise ValueError(f"bad publish order {order!r}")
        form = make_form(cls, spec.values, policy=spec.policy,
                         relationship=relationship,
                         management={"published_at": self.loop.now, "hits": 0})
        detail = self._action(spec, Action.REGISTER, form)
        if detail != "Registered":
            raise AlreadyPublished(f"{obj_id!r}: {detail}")
        rec.form = form
        rec.published = True
        if order == "top_down":
            self.instantiate(obj_id)
            updated = make_form(cls, spec.values, policy=spec.policy,
                                relationship=[rec.pname],
                                management=form.management)
            detail = self._action(spec, Action.MODIFY, updated)
            if detail != "Modified":
                raise OonError(f"pointer fill-in for {obj_id!r} failed: {detail}")
            rec.form = updated
        return detail

    def _action(self, spec: ObjectSpec, action: Action, form) -> str:
        net = self.info[spec.class_name]
        rid = net.issue_request(spec.entry_irn, action, form,
                                Requester(spec.class_name, spec.obj_id))
        self.loop.run()
        req = net.request(rid)
        if req.status != "complete":
            raise OonError(f"{action.value} for {spec.obj_id!r} {req.status}")
        return req.detail

    def discover(self, query: Query, entry: int = 0,
                 requester_class: str = "anonymous") -> DiscoveryResult:
        """Run a find and project the results to (iname, pointers)."""
        net = self.info[query.class_name]
        rid = net.issue_request(entry, Action.FIND, query,
                                Requester(requester_class))
        self.loop.run()
        req = net.request(rid)
        items = [(f.iname, tuple(f.relationship)) for f in req.forms]
        items.sort(key=lambda it: iname_key(net.cls, it[0]))
        return DiscoveryResult(items, req.status == "complete", req)

    def migrate(self, obj_id: str, to_domain: str) -> None:
        """Move the physical form; the pname and informational form stay put."""
        rec = self.record(obj_id)
        if rec.host is None:
            raise UnknownObject(f"{obj_id!r} has no live host")
        if to_domain not in self.datanet.domains:
            raise UnknownDomain(f"{to_domain!r}")
        host = self.datanet.remove_host(rec.pname)
        self.datanet.add_host(to_domain, host)
        rec.spec.domain = to_domain
        self.datanet.install_routes(rec.pname.global_id, to_domain)
        self._installed[rec.pname.global_id] = to_domain

    def delete(self, obj_id: str) -> None:
        """Tear down info-first so no dangling-pointer window opens."""
        rec = self.record(obj_id)
        if rec.published:
            self._action(rec.spec, Action.DELETE, rec.form)
            rec.published = False
            rec.form = None
        if rec.host is not None:
            self.datanet.remove_host(rec.pname)
            rec.host = None

    def drop_host(self, obj_id: str) -> None:
        """Fault injection: kill the host without touching the info layer."""
        rec = self.record(obj_id)
        if rec.host is None:
            raise UnknownObject(f"{obj_id!r} has no live host")
        self.datanet.remove_host(rec.pname)
        rec.host = None

    def audit_consistency(self) -> AuditReport:
        """Report dangling relationship pointers and orphan hosts.

        Orphans are informational, not failures: publishing is optional for
        objects whose pname is made known by other means.
        """
        dangling = []
        referenced = set()
        for class_name in sorted(self.info):
            for form in self.info[class_name].all_forms():
                for p in form.relationship:
                    referenced.add(p)
                    if self.datanet.host_of(p) is None:
                        dangling.append((form.iname, p))
        orphans = []
        for name in sorted(self.datanet.domains):
            for key in sorted(self.datanet.domains[name].hosts):
                p = self.datanet.domains[name].hosts[key].pname
                if p not in referenced:
                    orphans.append(p)
        return AuditReport(dangling, orphans)

    # -- sessions -------------------------------------------------------------

    def pull(self, consumer_id: str, producer: PName, chunks: int,
             reply_to: str = "SinkDataFrom") -> SessionTrace:
        rec = self.record(consumer_id)
        if rec.host is None:
            raise NotInstantiated(f"{consumer_id!r}")
        return run_pull(self.datanet, rec.host, producer, chunks, reply_to)

    def push(self, producer_id: str, consumer: PName, chunks: int) -> SessionTrace:
        rec = self.record(producer_id)
        if rec.host is None:
            raise NotInstantiated(f"{producer_id!r}")
        return run_push(self.datanet, rec.host, consumer, chunks)

    def interactive(self, a_id: str, b: PName, turns: int) -> SessionTrace:
        rec = self.record(a_id)
        if rec.host is None:
            raise NotInstantiated(f"{a_id!r}")
        return run_interactive(self.datanet, rec.host, b, turns)

    # -- bookkeeping ----------------------------------------------------------

    def _class_of(self, pname: PName) -> Optional[str]:
        return self._by_pname.get(pname)

    def finalize_metrics(self) -> Metrics:
        """Snapshot end-of-run gauge values into the metrics object."""
        m = self.metrics
        domains = self.datanet.domains.values()
        m.fib_inter_size = max((len(d.fib.inter) for d in domains), default=0)
        m.fib_intra_size = max((len(d.hosts) for d in domains), default=0)
        m.irn_store_sizes = [s for cn in sorted(self.info)
                             for s in self.info[cn].store_sizes()]
        return m
