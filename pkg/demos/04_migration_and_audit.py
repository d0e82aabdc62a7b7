"""Move an object between domains and audit cross-layer consistency.

The physical name follows the object, so a pointer learned before the
move keeps working with no re-discovery.  The audit then shows what a
crash looks like: a published form whose pointer no longer resolves.
"""

from oonsim import (
    AttributeKind,
    Eq,
    ObjectClass,
    ObjectSpec,
    Query,
    World,
    format_pname,
)

FEED = ObjectClass("feed", (("topic", AttributeKind.TEXT),))
READER = ObjectClass("reader", (("name", AttributeKind.TEXT),))


def main():
    world = World()
    world.add_class(FEED)
    world.add_class(READER)
    for d in ("west", "mid", "east"):
        world.add_domain(d)
    world.connect_domains("west", "mid", latency=1)
    world.connect_domains("mid", "east", latency=1)
    world.add_partition("feed", {"topic": ["m"]}, 2)
    world.add_partition("reader", {}, 1)

    world.add_object(ObjectSpec("news", "feed", {"topic": "weather"}, "west"))
    world.add_object(ObjectSpec("sub", "reader", {"name": "dana"}, "east"))
    world.instantiate("news")
    world.instantiate("sub")
    world.publish("news")

    res = world.discover(Query("feed", {"topic": Eq("weather")}))
    pname = res.items[0][1][0]
    print(f"discovered feed at {format_pname(pname)} in "
          f"{world.datanet.domain_of(pname)}")

    st = world.pull("sub", pname, chunks=2)
    print(f"pull before migration: {st.outcome}, {st.messages_sent} messages")

    xfind_before = world.metrics.sent["xfind"]
    world.migrate("news", "east")
    st = world.pull("sub", pname, chunks=2)
    print(f"pull after migration to east: {st.outcome}, same pname, "
          f"{world.metrics.sent['xfind'] - xfind_before} new discovery messages")

    report = world.audit_consistency()
    print(f"\naudit while healthy: dangling={len(report.dangling)} "
          f"orphans={len(report.orphans)}")

    world.drop_host("news")
    report = world.audit_consistency()
    print(f"audit after host crash: dangling={len(report.dangling)}")
    for iname, p in report.dangling:
        print(f"  form {iname.values} still points at dead {format_pname(p)}")


if __name__ == "__main__":
    main()
