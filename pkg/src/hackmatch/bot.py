"""Autonomous player built from three small parts.

A phase MDP picks what kind of work to do next (recon, enumeration, gaining
access, and optionally maintaining access and covering tracks, at most five
states). Per-phase character models type the actual commands. A five-W
knowledge base gates the MDP: while the bot does not know WHO it is
attacking, recon gets a strong preference; once who is known but WHAT runs
on the target is not, enumeration gets the same treatment. The gate
multiplies then renormalizes, so it raises the preferred phase's mass
without reordering the others among themselves.

Phase choice is argmax over the gated row with a fixed phase-order
tie-break; sampling is available behind a flag. After a lost match, every
transition edge and character edge the bot actually used is multiplied by
(1 - alpha) and rows are renormalized, so losing habits fade instead of
being erased.
"""

import logging
import random
from dataclasses import dataclass, field
from enum import Enum

from .charmodel import TOLERANCE, policy_predict, train_char_model
from .metrics import CommandGrammar

log = logging.getLogger("hackmatch.bot")


class Phase(str, Enum):
    RECON = "recon"
    ENUMERATION = "enumeration"  # realizes the scanning stage
    GAINING_ACCESS = "gaining_access"
    MAINTAINING_ACCESS = "maintaining_access"
    COVERING_TRACKS = "covering_tracks"


PHASE_ORDER = (
    Phase.RECON,
    Phase.ENUMERATION,
    Phase.GAINING_ACCESS,
    Phase.MAINTAINING_ACCESS,
    Phase.COVERING_TRACKS,
)

DEFAULT_PHASES = (Phase.RECON, Phase.ENUMERATION, Phase.GAINING_ACCESS)

ACT = "advance"  # the single abstract action label of the default MDP

DEFAULT_BOOST = 3.0
DEFAULT_ALPHA = 0.1


@dataclass(frozen=True)
class PhaseSet:
    phases: tuple = DEFAULT_PHASES

    def __post_init__(self):
        if not self.phases:
            raise ValueError("need at least one phase")
        if len(self.phases) > len(PHASE_ORDER):
            raise ValueError(f"at most {len(PHASE_ORDER)} phases allowed")
        if len(set(self.phases)) != len(self.phases):
            raise ValueError("duplicate phases")
        for p in self.phases:
            if not isinstance(p, Phase):
                raise ValueError(f"not a phase: {p!r}")


@dataclass
class TransitionModel:
    """probs[(state, action)] = distribution over next states."""

    probs: dict = field(default_factory=dict)

    def validate(self) -> None:
        seen_states = {s for s, _ in self.probs} | {
            s2 for dist in self.probs.values() for s2 in dist
        }
        if len(seen_states) > len(PHASE_ORDER):
            raise ValueError(f"at most {len(PHASE_ORDER)} states allowed")
        for key, dist in self.probs.items():
            total = sum(dist.values())
            if abs(total - 1.0) > TOLERANCE:
                raise ValueError(f"row {key}: probabilities sum to {total}, not 1")
            if any(p < 0 for p in dist.values()):
                raise ValueError(f"row {key}: negative probability")

    def row(self, state: Phase, action: str = ACT) -> dict:
        try:
            return self.probs[(state, action)]
        except KeyError:
            raise KeyError(f"no transition row for ({state}, {action})") from None

    def copy(self) -> "TransitionModel":
        return TransitionModel({k: dict(v) for k, v in self.probs.items()})


def default_transitions(phases: tuple = DEFAULT_PHASES) -> TransitionModel:
    """Forward-leaning prior: early phases hand off to the next one, gaining
    access likes to stay put once reached."""
    weights = {
        Phase.RECON: {Phase.RECON: 0.25, Phase.ENUMERATION: 0.55, Phase.GAINING_ACCESS: 0.2},
        Phase.ENUMERATION: {Phase.RECON: 0.1, Phase.ENUMERATION: 0.3, Phase.GAINING_ACCESS: 0.6},
        Phase.GAINING_ACCESS: {Phase.RECON: 0.05, Phase.ENUMERATION: 0.25,
                               Phase.GAINING_ACCESS: 0.7},
        Phase.MAINTAINING_ACCESS: {Phase.GAINING_ACCESS: 0.4, Phase.MAINTAINING_ACCESS: 0.4,
                                   Phase.COVERING_TRACKS: 0.2},
        Phase.COVERING_TRACKS: {Phase.RECON: 0.5, Phase.COVERING_TRACKS: 0.5},
    }
    probs = {}
    for state in phases:
        row = {p: w for p, w in weights[state].items() if p in phases}
        if not row:
            row = {state: 1.0}
        total = sum(row.values())
        probs[(state, ACT)] = {p: w / total for p, w in row.items()}
    model = TransitionModel(probs)
    model.validate()
    return model


@dataclass
class KnowledgeBase:
    """Five-W facts gathered during play; None means not yet known."""

    who: str | None = None    # opponent identity
    what: dict | None = None  # service map: port -> status
    when: float | None = None  # last useful timing observation
    where: str | None = None  # opponent address
    why: str | None = None    # current objective

    def knows_who(self) -> bool:
        return self.who is not None

    def knows_what(self) -> bool:
        return self.what is not None


@dataclass(frozen=True)
class PenaltyConfig:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")


@dataclass
class UsageLog:
    """Edges the bot actually exercised, for outcome learning."""

    transitions: set = field(default_factory=set)  # (state, action, next_state)
    char_edges: set = field(default_factory=set)   # (phase, context, token)

    def note_transition(self, state: Phase, action: str, nxt: Phase) -> None:
        self.transitions.add((state, action, nxt))

    def note_char(self, phase: str, ctx: tuple, token: str) -> None:
        self.char_edges.add((phase, ctx, token))


def gate_distribution(kb: KnowledgeBase, dist: dict, boost: float = DEFAULT_BOOST) -> dict:
    """Apply knowledge gating: multiply the preferred phase then renormalize."""
    gated = dict(dist)
    target = None
    if not kb.knows_who():
        target = Phase.RECON
    elif not kb.knows_what():
        target = Phase.ENUMERATION
    if target is not None and target in gated:
        gated[target] *= boost
    total = sum(gated.values())
    if total <= 0:
        raise ValueError("distribution has no mass")
    return {p: w / total for p, w in gated.items()}


def plan_next_state(
    kb: KnowledgeBase,
    current: Phase,
    transitions: TransitionModel,
    rng=None,
    action: str = ACT,
    boost: float = DEFAULT_BOOST,
    sample: bool = False,
    usage: UsageLog | None = None,
) -> Phase:
    """Choose the next phase from the gated transition row."""
    row = transitions.row(current, action)
    total = sum(row.values())
    if abs(total - 1.0) > TOLERANCE or any(p < 0 for p in row.values()):
        raise ValueError(f"invalid distribution for ({current}, {action})")
    gated = gate_distribution(kb, row, boost=boost)
    if sample:
        if rng is None:
            raise ValueError("sampling requires an rng")
        phases = sorted(gated, key=PHASE_ORDER.index)
        chosen = rng.choices(phases, weights=[gated[p] for p in phases])[0]
    else:
        chosen = min(gated, key=lambda p: (-gated[p], PHASE_ORDER.index(p)))
    if usage is not None:
        usage.note_transition(current, action, chosen)
    return chosen


def apply_outcome_penalty(
    models: dict,
    transitions: TransitionModel,
    usage: UsageLog,
    won: bool,
    alpha: float = DEFAULT_ALPHA,
) -> tuple[dict, TransitionModel]:
    """Post-match learning: wins change nothing; losses shrink every used
    edge by (1 - alpha) and renormalize its row."""
    PenaltyConfig(alpha=alpha)
    if won:
        return models, transitions
    new_models = {phase: m.copy() for phase, m in models.items()}
    for phase, ctx, token in usage.char_edges:
        model = new_models.get(phase)
        if model is None:
            continue
        row = model.table.get(ctx)
        if row is None or token not in row:
            continue
        row[token] *= 1.0 - alpha
        total = sum(row.values())
        model.table[ctx] = {t: w / total for t, w in row.items()}
    new_transitions = transitions.copy()
    for state, action, nxt in usage.transitions:
        row = new_transitions.probs.get((state, action))
        if row is None or nxt not in row:
            continue
        row[nxt] *= 1.0 - alpha
        total = sum(row.values())
        new_transitions.probs[(state, action)] = {p: w / total for p, w in row.items()}
    return new_models, new_transitions


# --- the playing loop -----------------------------------------------------------


class Bot:
    """Decision loop bound to a player daemon.

    Each step: pick a phase, type a command (retrying invalid generations up
    to three times), then do the phase's actual work through the daemon's
    verbs. Enumeration fills in what/where; gaining access turns exploited
    fingerprints into capture submissions.
    """

    MAX_RETRIES = 3

    def __init__(
        self,
        daemon,
        models: dict,
        transitions: TransitionModel | None = None,
        kb: KnowledgeBase | None = None,
        rng: random.Random | None = None,
        grammar: CommandGrammar | None = None,
        boost: float = DEFAULT_BOOST,
        alpha: float = DEFAULT_ALPHA,
        sample: bool = False,
        candidate_ports=None,
    ):
        self.daemon = daemon
        self.models = models
        self.transitions = transitions if transitions is not None else default_transitions(
            tuple(Phase(p) for p in models)
        )
        self.transitions.validate()
        self.kb = kb if kb is not None else KnowledgeBase()
        self.rng = rng if rng is not None else random.Random(0)
        self.grammar = grammar if grammar is not None else CommandGrammar()
        self.boost = boost
        self.alpha = alpha
        self.sample = sample
        self.usage = UsageLog()
        states = self.transitions_states()
        self.phase = Phase.RECON if Phase.RECON in states else sorted(
            states, key=PHASE_ORDER.index
        )[0]
        self.captured: set[str] = set()
        self.ports = tuple(candidate_ports) if candidate_ports is not None else None

    def transitions_states(self):
        return {s for s, _ in self.transitions.probs}

    def _candidate_ports(self) -> tuple:
        if self.ports is not None:
            return self.ports
        # both realms draw from one class pool, so our own ports are the
        # best guess at the opponent's
        return tuple(sorted({u["port"] for u in self.daemon.realm}))

    def type_command(self, phase: Phase, now: float) -> str:
        model = self.models.get(phase.value)
        if model is None:
            return ""
        target = self.kb.where or ""
        command = ""
        valid = False
        for _ in range(self.MAX_RETRIES):
            command = policy_predict(
                model,
                target_ip=target,
                rng=self.rng,
                sample=self.sample,
                on_edge=lambda ctx, tok: self.usage.note_char(phase.value, ctx, tok),
            )
            valid = bool(command) and self.grammar.is_valid(command)
            if valid:
                break
        if command:
            self.daemon.submit_command(command, valid=valid, now=now)
        return command

    def step(self, now: float) -> Phase:
        """One decision cycle; returns the phase acted in."""
        phase = plan_next_state(
            self.kb,
            self.phase,
            self.transitions,
            rng=self.rng,
            boost=self.boost,
            sample=self.sample,
            usage=self.usage,
        )
        self.phase = phase
        self.type_command(phase, now)
        handler = {
            Phase.RECON: self._do_recon,
            Phase.ENUMERATION: self._do_enumeration,
            Phase.GAINING_ACCESS: self._do_gaining_access,
            Phase.MAINTAINING_ACCESS: self._do_maintaining_access,
            Phase.COVERING_TRACKS: self._do_covering_tracks,
        }[phase]
        handler(now)
        return phase

    def _do_recon(self, now: float) -> None:
        self.kb.where = self.daemon.get_opponent_ip()
        self.kb.who = self.daemon.opponent
        self.kb.why = "destroy the opposing realm"

    def _do_enumeration(self, now: float) -> None:
        if self.kb.where is None:
            self.kb.where = self.daemon.get_opponent_ip()
        surface = self.daemon.surface
        scan = {}
        for port in self._candidate_ports():
            scan[port] = "open" if surface.probe(self.kb.where, port) == 200 else "closed"
        self.kb.what = scan
        self.kb.when = now

    def _do_gaining_access(self, now: float) -> None:
        if self.kb.what is None or self.kb.where is None:
            return
        for port, status in sorted(self.kb.what.items()):
            if status != "open":
                continue
            outcome = self.daemon.attack_unit(port, "key-guess", target_host=self.kb.where)
            if not outcome.startswith("FLAG "):
                continue
            fingerprint = outcome.split(" ", 1)[1].strip()
            if fingerprint in self.captured:
                continue
            if self.daemon.capture_unit(fingerprint, now=now):
                self.captured.add(fingerprint)
                log.info("%s captured a unit on port %d", self.daemon.name, port)
            return  # one capture per cycle keeps the match readable

    def _do_maintaining_access(self, now: float) -> None:
        self.kb.when = now

    def _do_covering_tracks(self, now: float) -> None:
        pass

    def learn_outcome(self, won: bool) -> None:
        self.models, self.transitions = apply_outcome_penalty(
            self.models, self.transitions, self.usage, won, alpha=self.alpha
        )


def load_phase_models(corpus_dir, phases=DEFAULT_PHASES, k: int = 4) -> dict:
    """Train one model per phase from <corpus_dir>/<phase>.txt files."""
    import os

    from .charmodel import load_corpus_file

    models = {}
    for phase in phases:
        path = os.path.join(str(corpus_dir), f"{phase.value}.txt")
        models[phase.value] = train_char_model(phase.value, load_corpus_file(path), k=k)
    return models


def default_phase_models(phases=DEFAULT_PHASES, k: int = 4) -> dict:
    """Models trained from the packaged starter corpus."""
    from importlib import resources

    base = resources.files("hackmatch") / "data" / "corpus"
    models = {}
    for phase in phases:
        text = (base / f"{phase.value}.txt").read_text(encoding="utf-8")
        lines = [line for line in text.splitlines() if line.strip()]
        models[phase.value] = train_char_model(phase.value, lines, k=k)
    return models
