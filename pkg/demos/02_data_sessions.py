"""Run the three data exchange patterns between objects in different domains.

Every exchange is a plain Data message addressed to <object, method>:
a pull is one request answered by a stream of chunks, a push is the
stream alone, and an interactive session alternates turn and reply.
"""

from oonsim import AttributeKind, ObjectClass, ObjectSpec, World

SENSOR = ObjectClass("sensor", (("label", AttributeKind.TEXT),))
PERSON = ObjectClass("person", (("name", AttributeKind.TEXT),),
                     methods=("Talking", "Listening"))


def main():
    world = World()
    world.add_class(SENSOR)
    world.add_class(PERSON)
    for d in ("edge", "core", "cloud"):
        world.add_domain(d)
    world.connect_domains("edge", "core", latency=1)
    world.connect_domains("core", "cloud", latency=2)

    world.add_object(ObjectSpec("cam", "sensor", {"label": "camera-7"}, "edge"))
    world.add_object(ObjectSpec("archive", "sensor", {"label": "archive"}, "cloud"))
    world.add_object(ObjectSpec("alice", "person", {"name": "alice"}, "edge"))
    world.add_object(ObjectSpec("bob", "person", {"name": "bob"}, "cloud"))
    for oid in ("cam", "archive", "alice", "bob"):
        world.instantiate(oid)

    print("== pull: archive fetches 3 chunks from the camera ==")
    st = world.pull("archive", world.record("cam").pname, chunks=3)
    print(f"  outcome={st.outcome} messages={st.messages_sent} (1 request + 3 chunks)")
    for tick, summary in st.entries:
        print(f"  t={tick} {summary}")

    print("\n== push: the camera streams 2 chunks unprompted ==")
    st = world.push("cam", world.record("archive").pname, chunks=2)
    print(f"  outcome={st.outcome} messages={st.messages_sent}")

    print("\n== interactive: alice and bob talk for 3 turns ==")
    st = world.interactive("alice", world.record("bob").pname, turns=3)
    print(f"  outcome={st.outcome} messages={st.messages_sent} (2 per turn)")

    m = world.finalize_metrics()
    print(f"\nconservation: sent={m.messages_sent()} "
          f"delivered={m.messages_delivered()} dropped={m.messages_dropped()}")


if __name__ == "__main__":
    main()
