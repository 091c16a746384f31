import pytest

from fairdraw import codec
from fairdraw.codec import AbortNotice, CountersignedHashAggregate, DrawAnnounce, GuarantorCommit
from fairdraw.model import Cause
from fairdraw.register import verify_transcript
from fairdraw.simnet import (
    HONEST,
    ConfigError,
    Fault,
    MessageRef,
    ParticipantSpec,
    SimSchedule,
    Simulation,
    Strategy,
    build_specs,
    check_no_forgery,
    coalition_bias_experiment,
    make_keys,
    parse_scenario,
    run_draw,
    seed_from_text,
)

REVEAL_KINDS = {"InitiatorReveal", "GuarantorReveal", "RevealAggregate"}
SEED = bytes(range(32))


def simulate(strategies, k=3, schedule=SimSchedule(), draws=1, scheme="ideal", **kw):
    sim = Simulation(build_specs(strategies, SEED, scheme), **kw)
    outcomes = [sim.run_draw(k, schedule) for _ in range(draws)]
    return sim, outcomes[-1]


def honest_aborts(sim, outcome):
    return {n: outcome.aborts.get(n) for n in sim.honest}


def test_happy_path():
    sim, out = simulate([HONEST] * 3, k=10)
    assert out.completed and 0 <= out.result < 10
    assert set(out.results.values()) == {out.result}
    assert len(set(out.transcripts.values())) == 1
    for data in out.transcripts.values():
        v = verify_transcript(data, sim.roster)
        assert v.valid and v.result == out.result
    assert out.duration > 0 and len(out.trace) > 0


def test_run_draw_function_matches_simulation():
    specs = build_specs([HONEST] * 3, SEED)
    a = run_draw(specs, 5, SimSchedule(seed=SEED))
    b = Simulation(specs).run_draw(5, SimSchedule(seed=SEED))
    assert a.digest() == b.digest()


def test_determinism():
    faults = (Fault("delay", step=5, delay=1.5), Fault("duplicate", step=9))
    schedule = SimSchedule(seed=SEED, faults=faults)
    strategies = [HONEST, Strategy("adaptive"), Strategy("renege")]
    digests = set()
    for _ in range(3):
        sim = Simulation(build_specs(strategies, SEED))
        digests.add(tuple(sim.run_draw(4, schedule).digest() for _ in range(3)))
    assert len(digests) == 1
    other = Simulation(build_specs(strategies, SEED)).run_draw(4, SimSchedule(seed=bytes(32), faults=faults))
    assert other.digest() != next(iter(digests))[0]


def test_staller_at_hash_step():
    sim, out = simulate([HONEST, HONEST, Strategy("staller", stop_at_step=9)])
    assert not out.completed
    assert out.aborts["initiator"].cause == Cause.MISSING_PEER
    assert out.abort.cause == Cause.MISSING_PEER
    assert out.duration >= SimSchedule().timeout
    assert not {e.kind for e in out.trace} & REVEAL_KINDS


def test_staller_after_commitment_point_is_named():
    sim, out = simulate([HONEST, Strategy("staller", stop_at_step=13), HONEST])
    assert out.aborts["initiator"].cause == Cause.MISSING_PEER
    assert out.aborts["initiator"].culprit == "guarantor1"
    # commitments are kept as evidence
    assert "GuarantorHashAggregate" in {codec.decode(s).__class__.__name__ for s in _structures(out, "initiator")}


def _structures(out, name):
    from fairdraw.register import DrawTranscript

    return DrawTranscript.from_bytes(out.transcripts[name]).structures


def test_replaying_initiator_is_rejected():
    sim, out = simulate([Strategy("replayer", replay_tags=(DrawAnnounce.TAG,)), HONEST, HONEST], draws=2)
    assert out.draw_no == 2 and not out.completed
    for g in ("guarantor1", "guarantor2"):
        assert out.aborts[g].cause == Cause.BAD_DRAW_NO and out.aborts[g].phase == 1


@pytest.mark.parametrize("tag, step", [(GuarantorCommit.TAG, 9), (CountersignedHashAggregate.TAG, 11)])
def test_replaying_guarantor_is_rejected(tag, step):
    sim, out = simulate([HONEST, HONEST, Strategy("replayer", replay_tags=(tag,))], draws=2)
    assert out.aborts["initiator"].cause == Cause.BAD_DRAW_NO
    assert out.aborts["initiator"].phase == step


def test_replay_fault_from_previous_draw():
    ref = MessageRef(1, "DrawAnnounce", "initiator", "guarantor2")
    fault = Fault("replay", step=1, sender="initiator", recipient="guarantor1", ref=ref)
    sim = Simulation(build_specs([HONEST] * 3, SEED))
    sim.run_draw(3)
    out = sim.run_draw(3, SimSchedule(faults=(fault,)))
    assert out.aborts["guarantor1"].cause == Cause.BAD_DRAW_NO
    assert any("replay" in e.note for e in out.trace)


@pytest.mark.parametrize("target", [0, 1, 2])
def test_adaptive_forcing_aborts(target):
    # the colluding initiator relays the honest guarantor's reveal
    sim, out = simulate([Strategy("adaptive"), HONEST, Strategy("adaptive", target=target)])
    assert not out.completed
    for name in sim.honest:
        assert out.aborts[name].cause == Cause.BAD_HASH
        assert out.aborts[name].culprit == "guarantor2"


def test_adaptive_forcing_with_real_signatures():
    sim, out = simulate([Strategy("adaptive"), Strategy("adaptive", target=1), HONEST], scheme="ed25519")
    assert out.abort.cause == Cause.BAD_HASH and out.abort.culprit == "guarantor1"


def test_lone_adaptive_guarantor_just_stalls():
    # nobody tells it the other inputs before it must reveal, so it never does
    sim, out = simulate([HONEST, HONEST, Strategy("adaptive", target=0)])
    assert out.aborts["initiator"].cause == Cause.MISSING_PEER
    assert out.aborts["initiator"].culprit == "guarantor2"
    assert "GuarantorReveal" not in {e.kind for e in out.trace if e.sender == "guarantor2"}


def test_adaptive_that_complies_completes():
    sim, out = simulate([Strategy("constant"), HONEST, Strategy("adaptive")], draws=3)
    assert out.completed


@pytest.mark.parametrize("honest_at", [0, 1, 2, 3])
def test_coalition_of_all_but_one_cannot_force(honest_at):
    k = 4
    for target in range(k):
        strategies = [Strategy("adaptive", target=target) if i else Strategy("constant") for i in range(4)]
        strategies[honest_at] = HONEST
        sim, out = simulate(strategies, k=k, draws=2)
        assert not out.completed, (honest_at, target)
        for name in sim.honest:
            abort = out.aborts[name]
            assert abort.cause == Cause.BAD_HASH and abort.culprit == "guarantor3" if honest_at != 3 else abort.culprit


def test_renegers_are_named():
    for pos in (0, 1, 2):
        strategies = [HONEST] * 3
        strategies[pos] = Strategy("renege")
        sim, out = simulate(strategies)
        culprit = sim.order[pos]
        assert all(out.aborts[n].cause == Cause.BAD_HASH and out.aborts[n].culprit == culprit for n in sim.honest)


def test_renege_with_k1_changes_the_salt():
    sim, out = simulate([HONEST, Strategy("renege"), HONEST], k=1)
    assert out.aborts["initiator"].cause == Cause.BAD_HASH


@pytest.mark.parametrize(
    "fault, cause",
    [
        (Fault("drop", step=9, sender="guarantor1"), Cause.MISSING_PEER),
        (Fault("delay", step=9, delay=10_000), Cause.MISSING_PEER),
        (Fault("tamper", step=9, byte_index=20), Cause.BAD_SIGNATURE),
        (Fault("tamper", step=5, byte_index=0), Cause.DECODE_ERROR),
    ],
)
def test_faults_abort(fault, cause):
    sim, out = simulate([HONEST] * 3, schedule=SimSchedule(faults=(fault,)))
    assert not out.completed
    assert cause in {a.cause for a in out.aborts.values()}
    assert any(e.note for e in out.trace)


@pytest.mark.parametrize(
    "fault",
    [Fault("duplicate", step=9, count=10), Fault("delay", step=5, delay=2.0), Fault("duplicate", kind="RevealAggregate")],
)
def test_benign_faults_complete(fault):
    sim, out = simulate([HONEST] * 3, schedule=SimSchedule(faults=(fault,)))
    assert out.completed, out.aborts


def test_no_forgery_under_attack():
    for strategies in (
        [HONEST, HONEST, Strategy("adaptive", target=1)],
        [Strategy("renege"), HONEST, Strategy("replayer", replay_tags=(9,))],
        [Strategy("constant"), Strategy("adaptive"), HONEST],
    ):
        sim = Simulation(build_specs(strategies, SEED), audit_signatures=True)
        for _ in range(3):
            out = sim.run_draw(3)
            assert check_no_forgery(sim, out.trace) == []


def test_silent_mode_sends_no_notices():
    schedule = SimSchedule(faults=(Fault("drop", step=7, recipient="guarantor1"),))
    for mode, expect in (("signed-error", True), ("silent", False)):
        sim, out = simulate([HONEST] * 3, schedule=schedule, abort_mode=mode)
        notices = [e for e in out.trace if e.kind == AbortNotice.__name__]
        assert bool(notices) == expect
        assert out.aborts["guarantor1"].mode == mode


def test_configuration_errors():
    keys = make_keys(["a", "b", "c"], SEED)
    with pytest.raises(ConfigError):
        Simulation([ParticipantSpec("a", "initiator", keys["a"]), ParticipantSpec("b", "initiator", keys["b"])])
    with pytest.raises(ConfigError):
        Simulation([ParticipantSpec("a", "initiator", keys["a"])])
    mixed = make_keys(["c"], SEED, "ed25519")
    with pytest.raises(ConfigError):
        Simulation([ParticipantSpec("a", "initiator", keys["a"]), ParticipantSpec("c", "guarantor", mixed["c"])])
    with pytest.raises(ConfigError):
        Simulation(build_specs([HONEST] * 2, SEED)).run_draw(0)
    with pytest.raises(ConfigError):
        Strategy("berserk")
    with pytest.raises(ConfigError):
        Strategy("staller")
    with pytest.raises(ConfigError):
        Fault("explode")
    with pytest.raises(ConfigError):
        Fault("replay")
    with pytest.raises(ConfigError):
        SimSchedule(seed=b"short")


def test_bias_experiment_preconditions_and_small_run():
    with pytest.raises(ConfigError):
        coalition_bias_experiment(0, [HONEST, HONEST], 10, 2)
    with pytest.raises(ConfigError):
        coalition_bias_experiment(None, [HONEST, Strategy("constant")], 10, 2)
    rep = coalition_bias_experiment(1, [Strategy("constant"), HONEST, Strategy("constant")], 60, 3, seed=SEED)
    assert rep.trials == 60 and rep.aborted_runs == 0 and len(rep.counts) == 3
    forced = coalition_bias_experiment(None, [Strategy("constant", value=2), Strategy("constant")], 30, 3, seed=SEED)
    assert forced.counts == (0, 0, 30) and not forced.passed
    cheat = coalition_bias_experiment(0, [HONEST, Strategy("renege")], 5, 3, seed=SEED, max_attempts=7)
    assert cheat.trials == 0 and cheat.aborted_runs == 7


SCENARIO = """
# two draws, one guarantor goes quiet
seed  demo
scheme ed25519
k 5
trials 100
draws 2
timeout 12.5
latency 0.1
abort-mode silent
initiator ivy constant value=3
guarantor gus adaptive target=1
guarantor gail                      # honest
guarantor gil staller stop=9
guarantor gwen constant value=1,0,4,3,2
guarantor gabe replayer tags=1,9
fault tamper step=5 byte=7 count=2
fault replay step=1 to=gail ref=1:DrawAnnounce:ivy:gus:0
"""


def test_scenario_parser():
    sc = parse_scenario(SCENARIO)
    assert sc.seed == seed_from_text("demo")
    assert (sc.scheme, sc.k, sc.trials, sc.draws, sc.timeout, sc.latency, sc.abort_mode) == (
        "ed25519", 5, 100, 2, 12.5, 0.1, "silent",
    )
    kinds = [s.kind for s in sc.strategies]
    assert kinds == ["constant", "adaptive", "honest", "staller", "constant", "replayer"]
    assert sc.strategies[0].value == 3 and sc.strategies[1].target == 1
    assert sc.strategies[3].stop_at_step == 9 and sc.strategies[4].value == (1, 0, 4, 3, 2)
    assert sc.strategies[5].replay_tags == (1, 9)
    assert sc.honest_index == 2
    tamper, replay = sc.faults
    assert (tamper.action, tamper.step, tamper.byte_index, tamper.count) == ("tamper", 5, 7, 2)
    assert replay.ref == MessageRef(1, "DrawAnnounce", "ivy", "gus", 0) and replay.to == "gail"
    specs = sc.specs()
    assert [s.name for s in specs] == ["ivy", "gus", "gail", "gil", "gwen", "gabe"]
    assert sc.schedule().timeout == 12.5


def test_seed_text():
    hexseed = "ab" * 32
    assert seed_from_text(hexseed) == bytes.fromhex(hexseed)
    assert seed_from_text("x") != seed_from_text("y") and len(seed_from_text("x")) == 32


@pytest.mark.parametrize(
    "text",
    [
        "frobnicate 1",
        "k",
        "k zero",
        "k 0",
        "scheme rot13",
        "abort-mode loud",
        "initiator",
        "initiator i honest colour=red",
        "fault",
        "fault tamper byte",
        "fault replay ref=1",
        "fault tamper wat=1",
    ],
)
def test_scenario_errors(text):
    with pytest.raises(ConfigError):
        parse_scenario(text)


def test_scenario_member_order():
    with pytest.raises(ConfigError):
        parse_scenario("guarantor g\ninitiator i\n").specs()
    with pytest.raises(ConfigError):
        parse_scenario("initiator i\ninitiator j\nguarantor g\n").specs()
    with pytest.raises(ConfigError):
        parse_scenario("initiator i\nguarantor g\nguarantor h\n").honest_index


THREATS = [
    ("renege on commitment", "guarantor reveals a different permutation", [HONEST, HONEST, Strategy("renege")], 1, ()),
    ("renege on commitment", "initiator reveals a different number", [Strategy("renege"), HONEST, HONEST], 1, ()),
    ("adaptive input", "initiator relays, guarantor forces 0", [Strategy("adaptive"), HONEST, Strategy("adaptive", target=0)], 1, ()),
    ("adaptive input", "lone guarantor waits for other inputs", [HONEST, HONEST, Strategy("adaptive", target=0)], 1, ()),
    ("refusal / stall", "guarantor silent from the hash step", [HONEST, HONEST, Strategy("staller", stop_at_step=9)], 1, ()),
    ("refusal / stall", "initiator silent at its reveal", [Strategy("staller", stop_at_step=12), HONEST, HONEST], 1, ()),
    ("replay", "initiator resends last draw's announce", [Strategy("replayer", replay_tags=(DrawAnnounce.TAG,)), HONEST, HONEST], 2, ()),
    ("replay", "guarantor resends last draw's commitment", [HONEST, HONEST, Strategy("replayer", replay_tags=(GuarantorCommit.TAG,))], 2, ()),
    ("message tampering", "one byte flipped in transit", [HONEST] * 3, 1, (Fault("tamper", step=9, byte_index=30),)),
    ("message loss", "commitment dropped in transit", [HONEST] * 3, 1, (Fault("drop", step=9),)),
]


def test_threat_coverage_table(report):
    report("threat coverage", f"{'threat':<22} {'scenario':<42} outcome")
    for threat, scenario, strategies, draws, faults in THREATS:
        sim, out = simulate(strategies, draws=draws, schedule=SimSchedule(faults=faults))
        assert not out.completed
        assert all(out.aborts.get(n) is not None for n in sim.honest)
        report("threat coverage", f"{threat:<22} {scenario:<42} {out.abort}")
    report("threat coverage", f"{'dictionary attack':<22} {'see the crypto tests (crippled vs 512-bit salts)':<42} n/a")


def test_staller_goes_quiet_at_the_same_step_every_draw():
    sim = Simulation(build_specs([HONEST, HONEST, Strategy("staller", stop_at_step=9)], SEED))
    phases = [sim.run_draw(3).aborts["initiator"].phase for _ in range(3)]
    assert phases == [9, 9, 9]


def test_pinned_inputs_make_the_draw_predictable():
    from oracles import compose_result

    strategies = [Strategy("adaptive", value=1), Strategy("adaptive", value=(2, 0, 1)), Strategy("constant")]
    sim = Simulation(build_specs(strategies, SEED))
    expected = compose_result(1, [(2, 0, 1), (0, 1, 2)])
    assert {sim.run_draw(3).result for _ in range(5)} == {expected}
