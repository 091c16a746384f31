"""Command line: key generation, draws, transcript audits and experiments.

Exit codes: 0 success, 1 verification failure (or an aborted draw, or a
failed uniformity test), 2 usage error, 3 internal error.

Roster files list one participant per line::

    initiator alice alice.pub alice.sec
    guarantor bob   bob.pub   bob.sec

Key paths are relative to the roster file.  Secret key files are needed by
``run`` only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import crypto
from .crypto import KeyPair
from .model import GUARANTOR, INITIATOR, Member, Roster, RosterError
from .register import DrawRegister, RegisterError, verify_transcript
from .simnet import (
    ConfigError,
    ParticipantSpec,
    SimSchedule,
    Simulation,
    coalition_bias_experiment,
    parse_scenario,
    seed_from_text,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

SEED_ENV = "FAIRDRAW_SEED"


class UsageError(Exception):
    pass


def _emit(args: argparse.Namespace, text: str, record: dict) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print(text)


def _read(path: Path, what: str) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc.strerror or exc}") from None


def load_roster(path: "str | os.PathLike[str]", need_secrets: bool = False) -> tuple[Roster, dict[str, KeyPair]]:
    path = Path(path)
    base = path.parent
    text = _read(path, "roster").decode("utf-8", errors="replace")
    members, secrets, schemes = [], {}, set()
    for line_no, raw in enumerate(text.splitlines(), 1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        if len(words) not in (3, 4) or words[0] not in (INITIATOR, GUARANTOR):
            raise UsageError(f"{path}:{line_no}: expected 'role name pubfile [secfile]'")
        role, name, pub = words[:3]
        try:
            sid, public = crypto.load_public(_read(base / pub, "public key"))
        except crypto.CryptoError as exc:
            raise UsageError(f"{path}:{line_no}: {exc}") from None
        schemes.add(sid)
        members.append(Member(name, role, public))
        if len(words) == 4:
            try:
                key = crypto.load_secret(_read(base / words[3], "secret key"))
            except crypto.CryptoError as exc:
                raise UsageError(f"{path}:{line_no}: {exc}") from None
            if key.public != public:
                raise UsageError(f"{path}:{line_no}: secret key does not match {pub}")
            secrets[name] = key
        elif need_secrets:
            raise UsageError(f"{path}:{line_no}: no secret key file for {name}")
    if len(schemes) != 1:
        raise UsageError(f"{path}: all keys must use one signature scheme")
    try:
        roster = Roster(schemes.pop(), tuple(members))
    except RosterError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return roster, secrets


def _seed(arg: Optional[str]) -> Optional[bytes]:
    text = os.environ.get(SEED_ENV) or arg
    return seed_from_text(text) if text else None


# ---------------------------------------------------------------------------
# commands


def cmd_keygen(args: argparse.Namespace) -> int:
    if args.scheme not in (crypto.SCHEME_NAMES[s] for s in crypto.FILE_SCHEMES):
        raise UsageError("--scheme must be one of ed25519, ecdsa-p256")
    seed = seed_from_text(args.seed) if args.seed else None
    key = KeyPair.generate(args.scheme, seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pub, sec = out.with_name(out.name + ".pub"), out.with_name(out.name + ".sec")
    pub.write_bytes(crypto.dump_public(key))
    sec.write_bytes(crypto.dump_secret(key))
    sec.chmod(0o600)
    _emit(args, f"wrote {pub} and {sec}", {"public": str(pub), "secret": str(sec), "scheme": args.scheme})
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    roster, secrets = load_roster(args.roster, need_secrets=True)
    out_dir = Path(args.out_dir)
    seed = _seed(args.seed)
    try:
        registers = {m.name: DrawRegister.load(roster, out_dir / m.name) for m in roster.members}
    except (RegisterError, ValueError, OSError) as exc:
        raise UsageError(f"cannot resume the registers in {out_dir}: {exc}") from None
    specs = [ParticipantSpec(m.name, m.role, secrets[m.name]) for m in roster.members]
    sim = Simulation(specs, registers=registers)
    schedule = SimSchedule(seed=seed, entropy="seeded") if seed else SimSchedule(seed=os.urandom(32), entropy="system")
    outcome = sim.run_draw(args.k, schedule)
    for name in outcome.transcripts:
        entry = sim.participants[name].register.entries[-1]
        if not args.json:
            print(f"{name}: {out_dir / name / entry.transcript_ref}")
    if outcome.completed:
        _emit(
            args,
            f"draw {outcome.draw_no} result {outcome.result}",
            {"draw_no": outcome.draw_no, "k": args.k, "status": "completed", "result": outcome.result},
        )
        return EXIT_OK
    _emit(
        args,
        f"draw {outcome.draw_no} aborted: {outcome.abort}",
        {"draw_no": outcome.draw_no, "k": args.k, "status": "aborted", **_abort_record(outcome.abort)},
    )
    return EXIT_INVALID


def _abort_record(abort) -> dict:
    return {
        "phase": abort.phase,
        "cause": str(abort.cause),
        "culprit": abort.culprit,
        "mode": abort.mode,
        "reported_by": abort.reported_by,
    }


def cmd_verify(args: argparse.Namespace) -> int:
    roster, _ = load_roster(args.roster)
    data = _read(Path(args.transcript), "transcript")
    verdict = verify_transcript(data, roster)
    record = {
        "valid": verdict.valid,
        "result": verdict.result,
        "step": verdict.step,
        "cause": verdict.cause,
        "culprit": verdict.culprit,
        "detail": verdict.detail,
    }
    _emit(args, str(verdict), record)
    return EXIT_OK if verdict.valid else EXIT_INVALID


def _scenario(args: argparse.Namespace):
    sc = parse_scenario(_read(Path(args.scenario), "scenario").decode("utf-8", errors="replace"))
    seed = _seed(getattr(args, "seed", None))
    if seed:
        sc.seed = seed
    return sc


def cmd_simulate(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    sim = Simulation(sc.specs(), abort_mode=sc.abort_mode)
    for _ in range(sc.draws):
        outcome = sim.run_draw(sc.k, sc.schedule())
        record = {
            "draw_no": outcome.draw_no,
            "status": outcome.status,
            "result": outcome.result,
            "duration": round(outcome.duration, 6),
            "messages": len(outcome.trace),
            "aborts": {n: str(a) for n, a in outcome.aborts.items()},
        }
        if outcome.abort is not None:
            record.update(_abort_record(outcome.abort))
        if outcome.completed:
            text = f"draw {outcome.draw_no} result {outcome.result}"
        else:
            text = f"draw {outcome.draw_no} aborted: {outcome.abort}"
            for name, abort in outcome.aborts.items():
                text += f"\n  {name}: {abort}"
        _emit(args, text, record)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    trials = args.trials if args.trials is not None else sc.trials
    if trials is None:
        raise UsageError("give --trials or a 'trials' line in the scenario")
    if trials < 10 * sc.k:
        raise UsageError(f"{trials} trials is under-powered; need at least {10 * sc.k} (10 per bin)")
    report = coalition_bias_experiment(
        sc.honest_index, sc.strategies, trials, sc.k, seed=sc.seed, scheme=sc.scheme
    )
    record = {
        "bins": list(report.counts),
        "statistic": report.statistic,
        "dof": report.dof,
        "threshold": report.critical,
        "pass": report.passed,
        "aborted_runs": report.aborted_runs,
    }
    if args.json:
        _emit(args, "", record)
    else:
        width = max(report.counts) or 1
        for value, count in enumerate(report.counts):
            print(f"{value:>4} {count:>8} {'#' * round(40 * count / width)}")
        print(report)
    return EXIT_OK if report.passed else EXIT_INVALID


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairdraw", description="Distributed random draws with signed transcripts.")
    parser.add_argument("--json", action="store_true", help="one JSON record per line instead of text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="create a signing key pair")
    p.add_argument("--scheme", default="ed25519", help="ed25519 or ecdsa-p256")
    p.add_argument("--out", required=True, help="path prefix; writes PREFIX.pub and PREFIX.sec")
    p.add_argument("--seed", help="derive the key from this seed (testing only)")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("run", help="run one all-honest draw and record it")
    p.add_argument("--roster", required=True)
    p.add_argument("--k", type=int, required=True, help="draw from 0..k-1")
    p.add_argument("--seed", help=f"reproducible run; ${SEED_ENV} overrides it")
    p.add_argument("--out-dir", required=True, help="one register directory per participant")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="audit a transcript file")
    p.add_argument("--transcript", required=True)
    p.add_argument("--roster", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run the draws described by a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", help=f"override the scenario seed; ${SEED_ENV} overrides both")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="uniformity test over many draws of a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", help=f"override the scenario seed; ${SEED_ENV} overrides both")
    p.set_defaults(func=cmd_stats)

    # accept --json after the subcommand as well
    for p in sub.choices.values():
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"fairdraw: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        print(f"fairdraw: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
