"""Deterministic in-process transport, fault injection and adversaries.

Time is virtual: a heap of delivery and timer events is processed in order
until nothing is left.  Links are FIFO unless a ``delay`` fault pushes a
message past later ones.  Everything random (latencies, every participant's
entropy) is derived from ``SimSchedule.seed``, so a run is reproducible bit
for bit.  ``SimSchedule(entropy="system")`` draws secrets from the operating
system instead.

Adversaries are participant subclasses.  All non-honest participants of a
simulation form one coalition that pools what its members know (their own
secrets plus anything they have seen), which is what an ``n - 1`` coalition
can do in the worst case.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

from . import codec, crypto
from .codec import Structure
from .crypto import EntropySource, KeyPair, derive_seed
from .model import GUARANTOR, INITIATOR, Abort, Cause, Member, Roster
from .permutation import Permutation, compose_all, forcing_permutation, identity, inverse
from .protocol import DEFAULT_TIMEOUT, Guarantor, Initiator, Participant
from .register import DrawRegister, RegisterError, verify_transcript
from .stats import ChiSquareReport, chi_square_report

STRATEGY_KINDS = ("honest", "constant", "renege", "adaptive", "replayer", "staller")
FAULT_ACTIONS = ("drop", "duplicate", "delay", "replay", "tamper")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Strategy:
    """How a participant behaves.

    ``constant``: fixed input (``value`` is the initiator's number or the
    guarantor's permutation; defaults are 0 and the identity).  Other
    adversarial kinds also use ``value`` when it is given and draw a fresh
    random input otherwise.
    ``renege``: reveals something other than what it committed to.
    ``adaptive``: withholds its reveal until the coalition knows every other
    input, then either complies (``target=None``) or submits a new
    permutation that forces ``target``.
    ``replayer``: answers with its own messages from the previous draw for
    the structure tags in ``replay_tags``.
    ``staller``: goes silent from step ``stop_at_step`` on.
    """

    kind: str = "honest"
    value: Optional[Union[int, tuple[int, ...]]] = None
    target: Optional[int] = None
    stop_at_step: Optional[int] = None
    replay_tags: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy {self.kind!r}")
        if self.kind == "staller" and self.stop_at_step is None:
            raise ConfigError("staller needs stop_at_step")

    @property
    def honest(self) -> bool:
        return self.kind == "honest"


HONEST = Strategy()


@dataclass(frozen=True)
class ParticipantSpec:
    name: str
    role: str
    keys: KeyPair
    strategy: Strategy = HONEST


@dataclass(frozen=True)
class MessageRef:
    """Names a message sent in an earlier (or the current) draw."""

    draw_no: int
    kind: str
    sender: Optional[str] = None
    recipient: Optional[str] = None
    nth: int = 0


@dataclass(frozen=True)
class Fault:
    """One fault-script entry, applied to the next ``count`` matching sends.

    A send matches when it is produced at or after ``time`` and, where given,
    its protocol ``step``, ``kind`` (structure class name), ``sender`` and
    ``recipient`` agree.  ``replay`` injects the ``ref`` message (to
    ``to`` or its original recipient) at once, so it arrives ahead of the
    matching send.
    """

    action: str
    step: Optional[int] = None
    time: Optional[float] = None
    kind: Optional[str] = None
    sender: Optional[str] = None
    recipient: Optional[str] = None
    count: int = 1
    delay: float = 0.0
    byte_index: int = 0
    ref: Optional[MessageRef] = None
    to: Optional[str] = None

    def __post_init__(self) -> None:
        if self.action not in FAULT_ACTIONS:
            raise ConfigError(f"unknown fault action {self.action!r}")
        if self.action == "replay" and self.ref is None:
            raise ConfigError("replay fault needs a message ref")


@dataclass(frozen=True)
class SimSchedule:
    seed: bytes = bytes(32)
    latency: Union[float, tuple[float, float]] = (0.05, 0.25)
    faults: tuple[Fault, ...] = ()
    timeout: float = DEFAULT_TIMEOUT
    max_time: float = 3600.0
    entropy: str = "seeded"

    def __post_init__(self) -> None:
        if len(self.seed) != 32:
            raise ConfigError("schedule seed must be 32 bytes")
        if self.entropy not in ("seeded", "system"):
            raise ConfigError(f"unknown entropy mode {self.entropy!r}")


@dataclass(frozen=True)
class TraceEntry:
    sent_at: float
    deliver_at: Optional[float]
    draw_no: int
    sender: str
    recipient: str
    kind: str
    step: int
    data: bytes
    note: str = ""


@dataclass
class RunOutcome:
    draw_no: int
    k: int
    status: str
    result: Optional[int]
    abort: Optional[Abort]
    results: dict[str, Optional[int]]
    aborts: dict[str, Abort]
    transcripts: dict[str, bytes]
    trace: list[TraceEntry]
    duration: float

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def digest(self) -> str:
        """Fingerprint of everything observable about the run."""
        h = hashlib.sha3_256()
        h.update(repr((self.draw_no, self.k, self.status, self.result, self.abort, sorted(self.results.items()))).encode())
        h.update(repr(sorted((n, repr(a)) for n, a in self.aborts.items())).encode())
        for name in sorted(self.transcripts):
            h.update(name.encode() + self.transcripts[name])
        for e in self.trace:
            h.update(repr((e.sent_at, e.deliver_at, e.sender, e.recipient, e.kind, e.note)).encode() + e.data)
        return h.hexdigest()


# ---------------------------------------------------------------------------
# coalition and adversaries


class Coalition:
    """Shared knowledge of all adversarial participants for the current draw."""

    def __init__(self, members: Iterable[str]) -> None:
        self.members = set(members)
        self.knowledge: dict[str, Union[int, Permutation]] = {}
        self._waiters: list[Callable[[], bool]] = []

    def reset(self) -> None:
        self.knowledge.clear()
        self._waiters.clear()

    def publish(self, name: str, value: Union[int, Permutation]) -> None:
        self.knowledge.setdefault(name, value)
        self._poll()

    def wait(self, attempt: Callable[[], bool]) -> None:
        self._waiters.append(attempt)
        self._poll()

    def _poll(self) -> None:
        progressed = True
        while progressed:
            progressed = False
            for attempt in list(self._waiters):
                if attempt():
                    self._waiters.remove(attempt)
                    progressed = True


class _Adversary:
    strategy: Strategy
    coalition: Coalition

    def on_committed(self) -> None:
        value = self.number if isinstance(self, Initiator) else self.perm
        self.coalition.publish(self.name, value)

    def _publish(self, abort: Optional[Abort] = None) -> None:
        try:
            super()._publish(abort)
        except RegisterError:
            # a partner it did not check cheated and its own register refused
            # the draw; book it as an abort so draw numbers stay in step
            verdict = verify_transcript(self.transcript, self.roster)
            self.result = None
            self.abort = Abort(verdict.step, Cause(verdict.cause), verdict.culprit, self.abort_mode)
            super()._publish(self.abort)


class _Silencer:
    """Mixin that drops every outgoing message from ``stop_at_step`` on."""

    stalled = False

    def _reset(self) -> None:
        super()._reset()
        self.stalled = False

    def send(self, recipient: str, data: bytes, s: Structure) -> None:
        if self.stalled or (s.STEP and s.STEP >= self.strategy.stop_at_step):
            self.stalled = True
            return
        super().send(recipient, data, s)

    def receive(self, sender: str, data: bytes) -> None:
        if not self.stalled:
            super().receive(sender, data)

    def on_timeout(self, token: int) -> None:
        if not self.stalled:
            super().on_timeout(token)


class _Replayer:
    """Mixin that answers with its own stale messages from the previous draw."""

    def send(self, recipient: str, data: bytes, s: Structure) -> None:
        store = self.__dict__.setdefault("_replay_store", {})
        key = (s.TAG, recipient)
        fresh = data
        if s.TAG in self.strategy.replay_tags and key in store:
            data = store[key]
        store[key] = fresh
        super().send(recipient, data, s)


class ColludingInitiator(_Adversary, Initiator):
    """Honest-looking initiator that shares everything with its coalition
    and does not check coalition partners' reveals."""

    def choose_number(self, src: EntropySource, k: int) -> int:
        value = self.strategy.value
        if self.strategy.kind == "constant" or value is not None:
            return int(value or 0) % k
        return super().choose_number(src, k)

    def checks_reveal_of(self, guarantor: str) -> bool:
        return guarantor not in self.coalition.members

    def on_reveal_seen(self, guarantor: str, s) -> None:
        try:
            self.coalition.publish(guarantor, Permutation(s.perm))
        except ValueError:
            pass

    def make_reveal(self):
        reveal = super().make_reveal()
        if self.strategy.kind == "renege":
            if self.k > 1:
                return codec.InitiatorReveal(reveal.salt, reveal.draw_no, (reveal.number + 1) % self.k)
            return codec.InitiatorReveal(bytes([reveal.salt[0] ^ 1]) + reveal.salt[1:], reveal.draw_no, reveal.number)
        return reveal


class ColludingGuarantor(_Adversary, Guarantor):
    def choose_permutation(self, src: EntropySource, k: int) -> Permutation:
        value = self.strategy.value
        if self.strategy.kind == "constant" or value is not None:
            if value is None or isinstance(value, int):
                return identity(k)
            return Permutation(tuple(value))
        return super().choose_permutation(src, k)

    def on_initiator_revealed(self, s) -> None:
        self.coalition.publish(self.initiator, s.number)

    def make_reveal(self):
        reveal = super().make_reveal()
        if self.strategy.kind == "renege":
            if self.k > 1:
                m = list(reveal.perm)
                m[0], m[1] = m[1], m[0]
                return codec.GuarantorReveal(reveal.salt, reveal.draw_no, tuple(m))
            return codec.GuarantorReveal(bytes([reveal.salt[0] ^ 1]) + reveal.salt[1:], reveal.draw_no, reveal.perm)
        return reveal

    def reveal_phase(self) -> None:
        if self.strategy.kind != "adaptive":
            super().reveal_phase()
            return
        self.coalition.wait(self._adaptive_reveal)

    def _adaptive_reveal(self) -> bool:
        if self.finished or self.reveal is not None:
            return True
        others = [self.initiator, *(g for g in self.guarantors if g != self.name)]
        if any(name not in self.coalition.knowledge for name in others):
            return False
        self.send_reveal(adaptive_reveal_adversary(self, self.coalition.knowledge))
        return True


def adaptive_reveal_adversary(g: Guarantor, observed: dict) -> codec.GuarantorReveal:
    """The reveal an adaptive guarantor submits once it knows every other input.

    With a target set, the highest-indexed adaptive guarantor of the
    coalition computes a permutation that steers the composed result to the
    target and submits it under its original salt; everyone else complies.
    """
    strategy: Strategy = g.strategy
    honest_reveal = g.make_reveal()
    adaptive = [
        name
        for name in g.guarantors
        if name in g.coalition.members and g._peers.get(name) == "adaptive"
    ]
    if strategy.target is None or (adaptive and adaptive[-1] != g.name):
        return honest_reveal
    k = g.k
    target = strategy.target % k
    perms = {name: observed[name] for name in g.guarantors if name != g.name}
    idx = g.guarantors.index(g.name)
    outer = compose_all([perms[n] for n in g.guarantors[:idx]], k)
    inner = compose_all([perms[n] for n in g.guarantors[idx + 1 :]], k)
    x = inner.mapping[observed[g.initiator]]
    y = inverse(outer).mapping[target]
    forced = forcing_permutation(g.perm, x, y)
    return codec.GuarantorReveal(g.salt, g.draw_no, forced.mapping)


def _participant_class(role: str, strategy: Strategy) -> type[Participant]:
    if strategy.honest:
        return Initiator if role == INITIATOR else Guarantor
    base: type[Participant] = ColludingInitiator if role == INITIATOR else ColludingGuarantor
    if strategy.kind == "staller":
        return type(f"Stalling{base.__name__}", (_Silencer, base), {})
    if strategy.kind == "replayer":
        return type(f"Replaying{base.__name__}", (_Replayer, base), {})
    return base


# ---------------------------------------------------------------------------
# the simulator


def make_keys(names: Iterable[str], seed: bytes, scheme: "str | int" = "ideal") -> dict[str, KeyPair]:
    return {name: KeyPair.generate(scheme, derive_seed(seed, "key", name)) for name in names}


def roster_for(specs: Sequence[ParticipantSpec]) -> Roster:
    schemes = {s.keys.scheme for s in specs}
    if len(schemes) != 1:
        raise ConfigError("all participants must use the same signature scheme")
    return Roster(schemes.pop(), tuple(Member(s.name, s.role, s.keys.public) for s in specs))


class Simulation:
    """A fixed roster of participants running draws one after another."""

    def __init__(
        self,
        specs: Sequence[ParticipantSpec],
        *,
        registers: Optional[dict[str, DrawRegister]] = None,
        abort_mode: str = "signed-error",
        audit_signatures: bool = False,
    ) -> None:
        roles = [s.role for s in specs]
        if roles.count(INITIATOR) != 1 or roles.count(GUARANTOR) < 1:
            raise ConfigError("need exactly one initiator and at least one guarantor")
        self.specs = list(specs)
        self.roster = roster_for(specs)
        self.coalition = Coalition(s.name for s in specs if not s.strategy.honest)
        adaptive_flags = {s.name: s.strategy.kind for s in specs}
        self.participants: dict[str, Participant] = {}
        for spec in specs:
            cls = _participant_class(spec.role, spec.strategy)
            reg = (registers or {}).get(spec.name) or DrawRegister(self.roster)
            p = cls(spec.name, spec.keys, self.roster, reg, abort_mode=abort_mode)
            p.strategy = spec.strategy
            p.coalition = self.coalition
            p._peers = adaptive_flags
            if audit_signatures:
                _attach_sign_log(p)
            self.participants[spec.name] = p
        self.order = [s.name for s in specs]
        self.initiator = self.roster.initiator
        self.previous_trace: list[TraceEntry] = []
        self.last_trace: list[TraceEntry] = []

    @property
    def honest(self) -> list[str]:
        return [s.name for s in self.specs if s.strategy.honest]

    def run_draw(self, k: int, schedule: SimSchedule = SimSchedule()) -> RunOutcome:
        if k < 1:
            raise ConfigError("k must be at least 1")
        self.previous_trace, self.last_trace = self.last_trace, []
        run = _Run(self, k, schedule)
        return run.execute()


def _attach_sign_log(p: Participant) -> None:
    p.signed_log = set()
    original = p.sign

    def sign(s: Structure) -> Structure:
        signed = original(s)
        p.signed_log.add(hashlib.sha3_256(codec.signing_payload(s, p.name)).digest())
        return signed

    p.sign = sign


class _Run:
    def __init__(self, sim: Simulation, k: int, schedule: SimSchedule) -> None:
        self.sim = sim
        self.k = k
        self.schedule = schedule
        self.faults = [[f, f.count] for f in schedule.faults]
        self.queue: list = []
        self.seq = 0
        self.now = 0.0
        self.link_clock: dict[tuple[str, str], float] = {}
        self.timer_token: dict[str, int] = {}
        self.finished_at: dict[str, float] = {}
        self.trace = sim.last_trace

    def _push(self, at: float, event: tuple) -> None:
        self.seq += 1
        heapq.heappush(self.queue, (at, self.seq, event))

    def _latency(self) -> float:
        lat = self.schedule.latency
        if isinstance(lat, tuple):
            return self.rng.uniform(*lat)
        return float(lat)

    def execute(self) -> RunOutcome:
        sim, parts = self.sim, self.sim.participants
        initiator = parts[sim.initiator]
        self.draw_no = initiator.register.next_draw_number()
        self.rng = random.Random(int.from_bytes(derive_seed(self.schedule.seed, "latency", self.draw_no), "big"))
        sim.coalition.reset()
        for name in sim.order:
            p = parts[name]
            p.timeout = self.schedule.timeout
            if self.schedule.entropy == "system":
                p.entropy = lambda draw_no: EntropySource.system()
            else:
                p.entropy = _entropy_for(self.schedule.seed, name)
            if isinstance(p, Guarantor):
                p.begin_draw()
        initiator.start(self.k)
        self._drain()
        while self.queue:
            at, _, event = heapq.heappop(self.queue)
            if at > self.schedule.max_time:
                break
            self.now = at
            if event[0] == "deliver":
                _, sender, recipient, data = event
                parts[recipient].receive(sender, data)
            else:
                _, name, token = event
                parts[name].on_timeout(token)
            self._drain()
        self.queue.clear()
        for name in sim.order:
            p = parts[name]
            if not p.finished and (isinstance(p, Initiator) or p._log):
                p.fail(Abort(p.step, Cause.TIMEOUT), notify=False)
                self.finished_at.setdefault(name, self.now)
            p.outbox.clear()
        return self._outcome()

    def _drain(self) -> None:
        parts = self.sim.participants
        busy = True
        while busy:
            busy = False
            for name in self.sim.order:
                p = parts[name]
                while p.outbox:
                    busy = True
                    recipient, data = p.outbox.pop(0)
                    self._transmit(name, recipient, data)
        for name in self.sim.order:
            p = parts[name]
            if p.finished:
                self.finished_at.setdefault(name, self.now)
            elif p.waiting and self.timer_token.get(name) != p.wait_token:
                self.timer_token[name] = p.wait_token
                self._push(self.now + p.timeout, ("timer", name, p.wait_token))

    def _matches(self, f: Fault, sender: str, recipient: str, kind: Optional[type[Structure]]) -> bool:
        if f.time is not None and self.now < f.time:
            return False
        if f.step is not None and (kind is None or kind.STEP != f.step):
            return False
        if f.kind is not None and (kind is None or kind.__name__ != f.kind):
            return False
        if f.sender is not None and f.sender != sender:
            return False
        return f.recipient is None or f.recipient == recipient

    def _find(self, ref: MessageRef) -> Optional[TraceEntry]:
        hits = [
            e
            for e in (*self.sim.previous_trace, *self.trace)
            if e.draw_no == ref.draw_no
            and e.kind == ref.kind
            and (ref.sender is None or e.sender == ref.sender)
            and (ref.recipient is None or e.recipient == ref.recipient)
            and e.note in ("", "duplicate", "delayed")
        ]
        return hits[ref.nth] if ref.nth < len(hits) else None

    def _transmit(self, sender: str, recipient: str, data: bytes) -> None:
        kind = codec.peek_kind(data)
        extra_delay = 0.0
        copies = 1
        notes = []
        for entry in self.faults:
            f, remaining = entry
            if remaining <= 0 or not self._matches(f, sender, recipient, kind):
                continue
            entry[1] -= 1
            if f.action == "drop":
                self._log(sender, recipient, data, None, "dropped")
                return
            if f.action == "duplicate":
                copies += 1
                notes.append("duplicate")
            elif f.action == "delay":
                extra_delay += f.delay
                notes.append("delayed")
            elif f.action == "tamper":
                i = f.byte_index % len(data)
                data = data[:i] + bytes([data[i] ^ 0x01]) + data[i + 1 :]
                notes.append("tampered")
            elif f.action == "replay":
                old = self._find(f.ref)
                if old is not None:
                    target = f.to or old.recipient
                    at = self.now
                    self._push(at, ("deliver", old.sender, target, old.data))
                    self._log(old.sender, target, old.data, at, "replayed")
        for _ in range(copies):
            at = self.now + self._latency()
            if extra_delay:
                at += extra_delay
            else:
                at = max(at, self.link_clock.get((sender, recipient), 0.0))
                self.link_clock[(sender, recipient)] = at
            self._push(at, ("deliver", sender, recipient, data))
            self._log(sender, recipient, data, at, ",".join(notes))

    def _log(self, sender: str, recipient: str, data: bytes, at: Optional[float], note: str) -> None:
        kind = codec.peek_kind(data)
        self.trace.append(
            TraceEntry(
                self.now,
                at,
                self.draw_no,
                sender,
                recipient,
                kind.__name__ if kind else "?",
                kind.STEP if kind else 0,
                data,
                note,
            )
        )

    def _outcome(self) -> RunOutcome:
        sim, parts = self.sim, self.sim.participants
        results = {n: parts[n].result for n in sim.order}
        aborts = {n: parts[n].abort for n in sim.order if parts[n].abort is not None}
        transcripts = {n: parts[n].transcript.to_bytes() for n in sim.order if parts[n].transcript is not None}
        values = set(results.values())
        if None not in values and len(values) == 1:
            status, result, abort = "completed", values.pop(), None
        else:
            status, result = "aborted", None
            ranked = sorted(
                aborts,
                key=lambda n: (n not in sim.honest, self.finished_at.get(n, float("inf")), sim.order.index(n)),
            )
            abort = aborts[ranked[0]] if ranked else Abort(0, Cause.TIMEOUT)
        duration = max(self.finished_at.values(), default=self.now)
        return RunOutcome(self.draw_no, self.k, status, result, abort, results, aborts, transcripts, list(self.trace), duration)


def _entropy_for(seed: bytes, name: str) -> Callable[[int], EntropySource]:
    return lambda draw_no: EntropySource.seeded(derive_seed(seed, "entropy", name, draw_no))


def run_draw(
    participants: Sequence[ParticipantSpec], k: int, schedule: SimSchedule = SimSchedule()
) -> RunOutcome:
    """One draw on a fresh simulation (registers start empty)."""
    return Simulation(participants).run_draw(k, schedule)


def check_no_forgery(sim: Simulation, trace: Iterable[TraceEntry]) -> list[str]:
    """Signature blocks in ``trace`` that verify but were never produced by
    their claimed signer.  Needs ``audit_signatures=True``; empty is good."""
    problems = []
    for entry in trace:
        try:
            top = codec.decode(entry.data)
        except codec.DecodeError:
            continue
        stack = [top]
        while stack:
            s = stack.pop()
            inner = getattr(s, "inner", None)
            if inner is not None:
                stack.append(inner)
            stack.extend(getattr(s, "items", ()))
            if s.sig is None or sim.roster.role(s.sig.signer) is None:
                continue
            payload = codec.signing_payload(s, s.sig.signer)
            if not crypto.verify(sim.roster.scheme, sim.roster.public_key(s.sig.signer), payload, s.sig.signature):
                continue
            log = getattr(sim.participants[s.sig.signer], "signed_log", None)
            if log is not None and hashlib.sha3_256(payload).digest() not in log:
                problems.append(f"{type(s).__name__} from {entry.sender} carries a forged {s.sig.signer} signature")
    return problems


# ---------------------------------------------------------------------------
# experiments


def build_specs(
    strategies: Sequence[Strategy], seed: bytes, scheme: "str | int" = "ideal", names: Optional[Sequence[str]] = None
) -> list[ParticipantSpec]:
    """Position 0 is the initiator, the rest are guarantors in index order."""
    if len(strategies) < 2:
        raise ConfigError("need an initiator and at least one guarantor")
    names = list(names) if names else ["initiator", *(f"guarantor{i}" for i in range(1, len(strategies)))]
    keys = make_keys(names, seed, scheme)
    return [
        ParticipantSpec(name, INITIATOR if i == 0 else GUARANTOR, keys[name], strategy)
        for i, (name, strategy) in enumerate(zip(names, strategies))
    ]


def coalition_bias_experiment(
    honest_index: Optional[int],
    strategies: Sequence[Strategy],
    trials: int,
    k: int,
    *,
    seed: bytes = bytes(32),
    scheme: "str | int" = "ideal",
    max_attempts: Optional[int] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> ChiSquareReport:
    """Histogram of ``trials`` completed draws plus its chi-square statistic.

    ``honest_index`` names the single honest position (0 = initiator); pass
    None for the zero-honest negative control.  Aborted draws are counted in
    ``aborted_runs`` and excluded from the histogram.
    """
    honest = [i for i, s in enumerate(strategies) if s.honest]
    if honest_index is None:
        if honest:
            raise ConfigError("negative control must not contain honest participants")
    elif honest != [honest_index]:
        raise ConfigError(f"exactly position {honest_index} must be honest, got {honest}")
    sim = Simulation(build_specs(strategies, seed, scheme))
    schedule = SimSchedule(seed=seed)
    counts = [0] * k
    aborted = 0
    attempts = 0
    limit = max_attempts if max_attempts is not None else 2 * trials + 100
    while sum(counts) < trials and attempts < limit:
        attempts += 1
        outcome = sim.run_draw(k, schedule)
        if outcome.completed:
            counts[outcome.result] += 1
        else:
            aborted += 1
        if progress is not None:
            progress(sum(counts), aborted)
    return chi_square_report(counts, aborted_runs=aborted)


def dictionary_attack(
    commitment: bytes, draw_no: int, k: int, salts: Iterable[bytes]
) -> Optional[int]:
    """Search ``salts`` x ``range(k)`` for the initiator's hidden number."""
    for salt in salts:
        for number in range(k):
            secret = codec.encode(codec.InitiatorSecret(draw_no, number))
            if crypto.commit(secret, salt) == commitment:
                return number
    return None


def crippled_salts(bits: int = 8) -> list[bytes]:
    """Every 64-byte salt whose entropy is confined to the first ``bits`` bits."""
    width = (bits + 7) // 8
    return [i.to_bytes(width, "big") + bytes(crypto.SALT_LEN - width) for i in range(1 << bits)]


# ---------------------------------------------------------------------------
# scenario files
#
# One directive per line, ``#`` starts a comment:
#
#   seed <64 hex chars, or any text which is hashed>
#   scheme ideal | ed25519 | ecdsa-p256
#   k 3
#   trials 60000
#   draws 2
#   timeout 30
#   latency 0.1            (or: latency 0.05 0.25)
#   abort-mode signed-error | silent
#   initiator <name> [<strategy> [key=value ...]]
#   guarantor <name> [<strategy> [key=value ...]]
#   fault <action> [key=value ...]
#
# Strategy keys: value=0 or value=2,0,1; target=1; stop=9; tags=1,9.
# Fault keys: step time kind sender recipient count delay byte to, and
# ref=<draw>:<kind>[:<sender>[:<recipient>[:<nth>]]] for replays.


@dataclass
class Scenario:
    seed: bytes = bytes(32)
    scheme: str = "ideal"
    k: int = 3
    trials: Optional[int] = None
    draws: int = 1
    timeout: float = DEFAULT_TIMEOUT
    latency: Union[float, tuple[float, float]] = (0.05, 0.25)
    abort_mode: str = "signed-error"
    members: list[tuple[str, str, Strategy]] = field(default_factory=list)
    faults: list[Fault] = field(default_factory=list)

    @property
    def strategies(self) -> list[Strategy]:
        return [s for _, _, s in self.members]

    @property
    def honest_index(self) -> Optional[int]:
        honest = [i for i, s in enumerate(self.strategies) if s.honest]
        if len(honest) > 1:
            raise ConfigError("a bias experiment needs at most one honest participant")
        return honest[0] if honest else None

    def specs(self) -> list[ParticipantSpec]:
        if not self.members or self.members[0][0] != INITIATOR:
            raise ConfigError("the initiator must be the first participant line")
        if any(role != GUARANTOR for role, _, _ in self.members[1:]):
            raise ConfigError("only one initiator line is allowed")
        names = [name for _, name, _ in self.members]
        return build_specs(self.strategies, self.seed, self.scheme, names)

    def schedule(self) -> SimSchedule:
        return SimSchedule(self.seed, self.latency, tuple(self.faults), self.timeout)


def seed_from_text(text: str) -> bytes:
    """64 hex characters are taken verbatim; anything else is hashed."""
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raw = b""
    return raw if len(raw) == 32 else derive_seed("text-seed", text)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x != "")


def _params(words: Sequence[str], line_no: int) -> dict[str, str]:
    out = {}
    for word in words:
        key, sep, value = word.partition("=")
        if not sep:
            raise ConfigError(f"line {line_no}: expected key=value, got {word!r}")
        out[key] = value
    return out


def _strategy(words: Sequence[str], line_no: int) -> Strategy:
    if not words:
        return HONEST
    kind, params = words[0], _params(words[1:], line_no)
    value: Optional[Union[int, tuple[int, ...]]] = None
    if "value" in params:
        ints = _ints(params.pop("value"))
        value = ints[0] if len(ints) == 1 else ints
    target = int(params.pop("target")) if "target" in params else None
    stop = int(params.pop("stop")) if "stop" in params else None
    tags = _ints(params.pop("tags")) if "tags" in params else ()
    if params:
        raise ConfigError(f"line {line_no}: unknown strategy keys {sorted(params)}")
    return Strategy(kind, value, target, stop, tags)


def _fault(words: Sequence[str], line_no: int) -> Fault:
    if not words:
        raise ConfigError(f"line {line_no}: fault needs an action")
    p = _params(words[1:], line_no)
    ref = None
    if "ref" in p:
        parts = p.pop("ref").split(":")
        if len(parts) < 2:
            raise ConfigError(f"line {line_no}: ref needs at least draw:kind")
        ref = MessageRef(
            int(parts[0]),
            parts[1],
            parts[2] if len(parts) > 2 and parts[2] else None,
            parts[3] if len(parts) > 3 and parts[3] else None,
            int(parts[4]) if len(parts) > 4 else 0,
        )
    fault = Fault(
        words[0],
        step=int(p.pop("step")) if "step" in p else None,
        time=float(p.pop("time")) if "time" in p else None,
        kind=p.pop("kind", None),
        sender=p.pop("sender", None),
        recipient=p.pop("recipient", None),
        count=int(p.pop("count", 1)),
        delay=float(p.pop("delay", 0.0)),
        byte_index=int(p.pop("byte", 0)),
        ref=ref,
        to=p.pop("to", None),
    )
    if p:
        raise ConfigError(f"line {line_no}: unknown fault keys {sorted(p)}")
    return fault


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    for line_no, raw in enumerate(text.splitlines(), 1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        key, args = words[0], words[1:]
        try:
            if key in (INITIATOR, GUARANTOR):
                if not args:
                    raise ConfigError(f"line {line_no}: {key} needs a name")
                sc.members.append((key, args[0], _strategy(args[1:], line_no)))
            elif key == "fault":
                sc.faults.append(_fault(args, line_no))
            elif len(args) < 1:
                raise ConfigError(f"line {line_no}: {key} needs a value")
            elif key == "seed":
                sc.seed = seed_from_text(args[0])
            elif key == "scheme":
                crypto.scheme_id(args[0])
                sc.scheme = args[0]
            elif key == "k":
                sc.k = int(args[0])
            elif key == "trials":
                sc.trials = int(args[0])
            elif key == "draws":
                sc.draws = int(args[0])
            elif key == "timeout":
                sc.timeout = float(args[0])
            elif key == "latency":
                sc.latency = float(args[0]) if len(args) == 1 else (float(args[0]), float(args[1]))
            elif key == "abort-mode":
                if args[0] not in ("signed-error", "silent"):
                    raise ConfigError(f"line {line_no}: unknown abort mode {args[0]!r}")
                sc.abort_mode = args[0]
            else:
                raise ConfigError(f"line {line_no}: unknown directive {key!r}")
        except (ValueError, crypto.CryptoError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {line_no}: {exc}") from None
    if sc.k < 1 or sc.draws < 1:
        raise ConfigError("k and draws must be positive")
    return sc
