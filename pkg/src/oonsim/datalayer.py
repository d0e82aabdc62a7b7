"""Data layer: routing of Data messages on physical names and method dispatch.

One router per domain.  Inter-domain forwarding is keyed on the global id
only, so a router's table grows with the number of providers, not with
the number of objects.  Intra-domain delivery looks up the local id among
the domain's attached hosts.  Routing reads nothing but the callee name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .model import AccessPolicy, OonError, PName, format_pname
from .sim import EventLoop, Metrics, Trace


class NoRoute(OonError):
    pass


class NoSuchLocal(OonError):
    pass


class UnknownInterface(OonError):
    pass


class UnknownDomain(OonError):
    pass


@dataclass
class DataMessage:
    """The single data-layer message.

    Data exchange always happens in method context: the header names the
    calling object and method, the called object and method, and the
    reply-to method the callee should address subsequent data to.
    """

    caller: PName
    caller_method: str
    callee: PName
    callee_method: str
    reply_to_method: str
    priority: int = 0
    cumulated_time: int = 0
    payload: bytes = b""
    hop_limit: int = 64
    visited: list = field(default_factory=list)  # routers seen; instrumentation


@dataclass
class ForwardingTable:
    inter: dict = field(default_factory=dict)   # GlobalId -> interface id
    default: Optional[str] = None


# --- hosts -------------------------------------------------------------------


def _serve_send(host, msg):
    """Serve a pull request: emit the requested chunks to the reply-to method.

    The final chunk carries an end marker; a zero-chunk request still gets
    one empty completion message so the consumer terminates.
    """
    k = 0
    if msg.payload.startswith(b"pull:"):
        k = int(msg.payload.split(b":", 1)[1])
    out = []
    if k == 0:
        out.append(host.emit(msg.caller, msg.reply_to_method, b"end",
                             caller_method="SendDataTo"))
    else:
        for i in range(1, k + 1):
            payload = b"chunk:%d/%d" % (i, k)
            if i == k:
                payload += b";end"
            out.append(host.emit(msg.caller, msg.reply_to_method, payload,
                                 caller_method="SendDataTo"))
    return out


def _sink(host, msg):
    host.buffers.append((msg.callee_method, msg.payload))
    return []


def _listening(host, msg):
    """Conversation partner: buffer, and answer turn messages once."""
    host.buffers.append((msg.callee_method, msg.payload))
    if msg.payload.startswith(b"turn:"):
        n = msg.payload.split(b":", 1)[1]
        return [host.emit(msg.caller, msg.reply_to_method, b"reply:" + n,
                          caller_method="Talking", reply_to="Listening")]
    return []


class ObjectHost:
    """A physical form attached to one domain: method handlers plus buffers.

    Handlers are fixed per method name: SendDataTo serves pulls, Listening
    converses, every other declared method buffers what it receives.
    """

    def __init__(self, pname: PName, class_name: str, methods=(),
                 policy: AccessPolicy = None):
        self.pname = pname
        self.class_name = class_name
        self.policy = policy
        self.buffers = []
        self.handlers = {}
        for m in methods:
            if m == "SendDataTo":
                self.handlers[m] = _serve_send
            elif m == "Listening":
                self.handlers[m] = _listening
            else:
                self.handlers[m] = _sink

    def emit(self, callee: PName, callee_method: str, payload: bytes,
             caller_method: str = "SendDataTo", reply_to: str = "SinkDataFrom"):
        return DataMessage(caller=self.pname, caller_method=caller_method,
                           callee=callee, callee_method=callee_method,
                           reply_to_method=reply_to, payload=payload)


def dispatch(host: ObjectHost, msg: DataMessage) -> list:
    """Invoke the addressed method; unknown methods get a soft error reply."""
    assert msg.callee == host.pname
    handler = host.handlers.get(msg.callee_method)
    if handler is None:
        return [DataMessage(
            caller=host.pname, caller_method=msg.callee_method,
            callee=msg.caller, callee_method=msg.reply_to_method,
            reply_to_method="SinkDataFrom",
            payload=b"error:unknown-method:" + msg.callee_method.encode())]
    return handler(host, msg)


# --- domains and routing -----------------------------------------------------


@dataclass
class Domain:
    name: str
    fib: ForwardingTable = field(default_factory=ForwardingTable)
    interfaces: dict = field(default_factory=dict)   # interface id -> (peer, latency)
    hosts: dict = field(default_factory=dict)        # (GlobalId, LocalId) -> ObjectHost
    owned_globals: set = field(default_factory=set)


def route_data(domain: Domain, msg: DataMessage):
    """Forwarding decision from the callee name alone.

    Returns ("deliver", host) | ("forward", interface id) | ("drop", cause).
    """
    gid, lid = msg.callee.global_id, msg.callee.local_id
    if gid in domain.owned_globals:
        host = domain.hosts.get((gid, lid))
        if host is None:
            return ("drop", "no_such_local")
        return ("deliver", host)
    ifid = domain.fib.inter.get(gid)
    if ifid is None:
        ifid = domain.fib.default
    if ifid is None:
        return ("drop", "no_route")
    return ("forward", ifid)


def update_fib(domain: Domain, global_id: int, interface: str) -> None:
    """Install or overwrite the inter-domain route for one global prefix."""
    if interface not in domain.interfaces:
        raise UnknownInterface(f"{interface!r} not an interface of {domain.name!r}")
    domain.fib.inter[global_id] = interface


class DataNetwork:
    """Domains, links and the message plumbing over the shared event loop."""

    def __init__(self, loop: EventLoop, trace: Trace, metrics: Metrics,
                 resolver=None):
        self.loop = loop
        self.trace = trace
        self.metrics = metrics
        self.resolver = resolver    # PName -> requester class name, for policies
        self.domains = {}
        self.deliveries = []        # (tick, summary, visited) per delivered msg
        self._host_index = {}       # PName -> domain name

    def add_domain(self, name: str) -> Domain:
        if name in self.domains:
            raise ValueError(f"duplicate domain {name!r}")
        d = Domain(name)
        self.domains[name] = d
        self.loop.register(f"router:{name}",
                           lambda msg, dom=d: self._on_router(dom, msg))
        return d

    def domain(self, name: str) -> Domain:
        if name not in self.domains:
            raise UnknownDomain(f"{name!r}")
        return self.domains[name]

    def link(self, a: str, b: str, latency: int = 1) -> None:
        """Bidirectional link; interface ids are the peer domain names."""
        if latency < 1:
            raise ValueError("link latency must be >= 1 tick")
        self.domain(a).interfaces[b] = (b, latency)
        self.domain(b).interfaces[a] = (a, latency)

    def add_host(self, domain_name: str, host: ObjectHost) -> None:
        d = self.domain(domain_name)
        d.hosts[(host.pname.global_id, host.pname.local_id)] = host
        d.owned_globals.add(host.pname.global_id)
        self._host_index[host.pname] = domain_name

    def remove_host(self, pname: PName) -> ObjectHost:
        domain_name = self._host_index.pop(pname)
        d = self.domain(domain_name)
        host = d.hosts.pop((pname.global_id, pname.local_id))
        d.owned_globals = {h.pname.global_id for h in d.hosts.values()}
        return host

    def host_of(self, pname: PName) -> Optional[ObjectHost]:
        domain_name = self._host_index.get(pname)
        if domain_name is None:
            return None
        return self.domain(domain_name).hosts.get((pname.global_id, pname.local_id))

    def domain_of(self, pname: PName) -> Optional[str]:
        return self._host_index.get(pname)

    def install_routes(self, global_id: int, owner_domain: str) -> None:
        """Point every router's entry for this prefix toward the owner.

        Shortest paths over the link graph; deterministic tie-break by
        domain name.  Scripted plumbing, not a routing protocol.
        """
        parent = {owner_domain: None}
        frontier = [owner_domain]
        while frontier:
            nxt = []
            for name in frontier:
                for ifid in sorted(self.domain(name).interfaces):
                    peer = self.domain(name).interfaces[ifid][0]
                    if peer not in parent:
                        parent[peer] = name
                        nxt.append(peer)
            frontier = sorted(nxt)
        for name in sorted(self.domains):
            if name == owner_domain or name not in parent:
                continue
            update_fib(self.domains[name], global_id, parent[name])

    # -- message plumbing -----------------------------------------------------

    def send(self, msg: DataMessage, from_domain: str) -> None:
        """Inject a message at its sender's domain router."""
        self.metrics.sent["data"] += 1
        self.loop.post(0, f"router:{from_domain}", msg)

    def _on_router(self, domain: Domain, msg: DataMessage) -> None:
        msg.visited.append(domain.name)
        self.trace.log(
            f"DATA {format_pname(msg.caller)}.{msg.caller_method} -> "
            f"{format_pname(msg.callee)}.{msg.callee_method} "
            f"reply={msg.reply_to_method} hop={domain.name}")
        decision, arg = route_data(domain, msg)
        if decision == "drop":
            self._drop(arg)
        elif decision == "forward":
            if msg.hop_limit <= 0:
                self._drop("hop_limit")
                return
            peer, latency = domain.interfaces[arg]
            msg.hop_limit -= 1
            msg.cumulated_time += latency
            self.loop.post(latency, f"router:{peer}", msg)
        else:
            self._deliver(domain, arg, msg)

    def _drop(self, cause: str) -> None:
        self.metrics.dropped["data"] += 1
        self.metrics.drops_by_cause[cause] += 1

    def _deliver(self, domain: Domain, host: ObjectHost, msg: DataMessage) -> None:
        if host.policy is not None:
            requester_class = self.resolver(msg.caller) if self.resolver else None
            if not host.policy.exchange_rule.allows(requester_class):
                self._drop("exchange_denied")
                return
        self.metrics.delivered["data"] += 1
        self.metrics.data_hops.append(len(msg.visited) - 1)
        self.deliveries.append((
            self.loop.now,
            f"{format_pname(msg.caller)}.{msg.caller_method}->"
            f"{format_pname(msg.callee)}.{msg.callee_method}",
            tuple(msg.visited)))
        for out in dispatch(host, msg):
            self.send(out, domain.name)


# --- sessions ----------------------------------------------------------------


@dataclass
class SessionTrace:
    entries: list                 # (tick, message summary) at delivery
    outcome: str                  # completed | failed
    messages_sent: int = 0


def _session(net: DataNetwork, start_deliveries: int, start_sent: int,
             completed: bool) -> SessionTrace:
    entries = [(t, s) for t, s, _ in net.deliveries[start_deliveries:]]
    return SessionTrace(entries=entries,
                        outcome="completed" if completed else "failed",
                        messages_sent=net.metrics.sent["data"] - start_sent)


def run_pull(net: DataNetwork, consumer: ObjectHost, producer: PName,
             chunk_count: int, reply_to: str = "SinkDataFrom") -> SessionTrace:
    """Consumer-initiated retrieval: one request, then the chunks flow back."""
    d0, s0 = len(net.deliveries), net.metrics.sent["data"]
    buf0 = len(consumer.buffers)
    req = consumer.emit(producer, "SendDataTo",
                        b"pull:%d" % chunk_count,
                        caller_method="GetDataFrom", reply_to=reply_to)
    net.send(req, net.domain_of(consumer.pname))
    net.loop.run()
    received = [p for m, p in consumer.buffers[buf0:] if m == reply_to]
    completed = (len(received) == max(chunk_count, 1)
                 and bool(received) and received[-1].endswith(b"end"))
    return _session(net, d0, s0, completed)


def run_push(net: DataNetwork, producer: ObjectHost, consumer: PName,
             chunk_count: int) -> SessionTrace:
    """Producer-initiated transfer: the chunks flow with no request message."""
    d0, s0 = len(net.deliveries), net.metrics.sent["data"]
    target_host = net.host_of(consumer)
    buf0 = len(target_host.buffers) if target_host is not None else 0
    from_domain = net.domain_of(producer.pname)
    for i in range(1, chunk_count + 1):
        payload = b"chunk:%d/%d" % (i, chunk_count)
        if i == chunk_count:
            payload += b";end"
        net.send(producer.emit(consumer, "SinkDataFrom", payload), from_domain)
    net.loop.run()
    target_host = net.host_of(consumer)
    if target_host is None:
        completed = False
    else:
        received = [p for m, p in target_host.buffers[buf0:] if m == "SinkDataFrom"]
        completed = len(received) == chunk_count and (
            chunk_count == 0 or received[-1].endswith(b"end"))
    return _session(net, d0, s0, completed)


def run_interactive(net: DataNetwork, a: ObjectHost, b: PName,
                    turns: int) -> SessionTrace:
    """Alternating conversation; every turn message gets one reply."""
    d0, s0 = len(net.deliveries), net.metrics.sent["data"]
    buf0 = len(a.buffers)
    from_domain = net.domain_of(a.pname)
    for i in range(1, turns + 1):
        msg = a.emit(b, "Listening", b"turn:%d" % i,
                     caller_method="Talking", reply_to="Listening")
        net.send(msg, from_domain)
        net.loop.run()
    replies = [p for m, p in a.buffers[buf0:]
               if m == "Listening" and p.startswith(b"reply:")]
    return _session(net, d0, s0, len(replies) == turns)
