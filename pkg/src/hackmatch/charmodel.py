"""Per-phase character models that type like a hacker.

Each phase gets an order-k model over characters plus two special tokens:
END closes a command, TARGET_IP stands for "whatever address we are
attacking today". Training corpora have concrete addresses scrubbed to the
TARGET_IP token, so the model learns command shape, not one lab's IP plan;
generation expands the token to the live target at emission time.

Lines are padded with k BOS sentinels during training and decoding, so the
first characters of a command are predicted from a real line-start context
rather than a global character histogram. Generation walks contexts
longest-suffix-first, so an unseen k-gram falls back to shorter history
instead of dying. Argmax decoding with a fixed tie order keeps runs
reproducible; sampling sits behind a flag.
"""

import re
from dataclasses import dataclass, field

BOS = "<BOS>"
END = "<END>"
TARGET_IP = "<TARGET_IP>"

TOLERANCE = 1e-9

_IP_RE = re.compile(r"\b\d{1,3}(?:\.\d{1,3}){3}\b")
_HOST_RE = re.compile(r"\b[A-Za-z0-9][A-Za-z0-9-]*(?:\.[A-Za-z0-9][A-Za-z0-9-]*)+\b")


def normalize_command(text: str) -> str:
    """Scrub IP and hostname literals down to the TARGET_IP token."""
    text = _IP_RE.sub(TARGET_IP, text)
    out = []
    cursor = 0
    for m in _HOST_RE.finditer(text):
        # skip pieces of an already-inserted token and bare version strings
        if TARGET_IP in text[max(0, m.start() - len(TARGET_IP)):m.end()]:
            continue
        if all(part.isdigit() for part in m.group().split(".")):
            continue
        out.append(text[cursor:m.start()])
        out.append(TARGET_IP)
        cursor = m.end()
    out.append(text[cursor:])
    return "".join(out)


def tokenize(text: str) -> list[str]:
    """Split a command into single characters, with TARGET_IP kept whole."""
    tokens = []
    i = 0
    while i < len(text):
        if text.startswith(TARGET_IP, i):
            tokens.append(TARGET_IP)
            i += len(TARGET_IP)
        else:
            tokens.append(text[i])
            i += 1
    return tokens


def _check_distribution(dist: dict, where: str) -> None:
    total = sum(dist.values())
    if abs(total - 1.0) > TOLERANCE:
        raise ValueError(f"{where}: probabilities sum to {total}, not 1")
    if any(p < 0 for p in dist.values()):
        raise ValueError(f"{where}: negative probability")


def _renormalize(dist: dict) -> dict:
    total = sum(dist.values())
    if total <= 0:
        # degenerate row: fall back to uniform rather than dividing by zero
        n = len(dist)
        return {k: 1.0 / n for k in dist}
    return {k: v / total for k, v in dist.items()}


@dataclass
class CharModel:
    """Conditional next-token table for one phase.

    ``table`` maps a context tuple (0 to ``order`` most recent tokens) to a
    distribution over next tokens. Every row sums to 1 within 1e-9.
    """

    phase: str
    order: int
    table: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.order < 0:
            raise ValueError("order must be >= 0")
        for ctx, dist in self.table.items():
            _check_distribution(dist, f"context {ctx!r}")

    def copy(self) -> "CharModel":
        return CharModel(
            phase=self.phase,
            order=self.order,
            table={ctx: dict(dist) for ctx, dist in self.table.items()},
        )


def train_char_model(phase: str, corpus, k: int = 4) -> CharModel:
    """Count-and-normalize over all context lengths 0..k.

    Corpus lines should already be normalized (concrete addresses replaced
    by the TARGET_IP token); blank lines are skipped.
    """
    if k < 0:
        raise ValueError("order must be >= 0")
    lines = [line for line in corpus if line.strip()]
    if not lines:
        raise ValueError("corpus must be nonempty")
    counts: dict[tuple, dict[str, int]] = {}
    for line in lines:
        # BOS padding gives the opening characters full-order context;
        # BOS is never a prediction target, only part of a context.
        tokens = [BOS] * k + tokenize(line) + [END]
        for i in range(k, len(tokens)):
            token = tokens[i]
            history = tokens[i - k:i]
            for back in range(len(history) + 1):
                ctx = tuple(history[len(history) - back:])
                row = counts.setdefault(ctx, {})
                row[token] = row.get(token, 0) + 1
    table = {ctx: _renormalize({t: float(n) for t, n in row.items()})
             for ctx, row in counts.items()}
    model = CharModel(phase=phase, order=k, table=table)
    model.validate()
    return model


def _pick(dist: dict, rng=None, sample: bool = False) -> str:
    if sample:
        if rng is None:
            raise ValueError("sampling requires an rng")
        tokens = sorted(dist)
        return rng.choices(tokens, weights=[dist[t] for t in tokens])[0]
    # argmax; lexicographic tie-break keeps decoding deterministic
    return min(dist, key=lambda t: (-dist[t], t))


def policy_predict(
    model: CharModel,
    prefix: str = "",
    target_ip: str = "",
    rng=None,
    sample: bool = False,
    max_len: int = 200,
    on_edge=None,
) -> str:
    """Generate one command. TARGET_IP tokens expand to ``target_ip`` at
    emission, END stops generation. ``on_edge(ctx, token)`` observes every
    chosen table edge so outcome learning can find them again."""
    if not model.table:
        raise ValueError("model is untrained")
    context = [BOS] * model.order + tokenize(prefix)
    emitted = prefix
    # iteration cap bounds the walk even when every emission is zero-width
    # (empty target_ip expanding TARGET_IP tokens)
    for _ in range(4 * max_len + 8):
        dist = None
        ctx_used = None
        for back in range(min(model.order, len(context)), -1, -1):
            ctx = tuple(context[len(context) - back:]) if back else ()
            if ctx in model.table:
                dist = model.table[ctx]
                ctx_used = ctx
                break
        if dist is None:
            break
        token = _pick(dist, rng=rng, sample=sample)
        if on_edge is not None:
            on_edge(ctx_used, token)
        if token == END:
            break
        piece = target_ip if token == TARGET_IP else token
        if len(emitted) + len(piece) > max_len:
            break
        context.append(token)
        emitted += piece
    return emitted


def load_corpus_file(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [normalize_command(line.rstrip("\n")) for line in fh if line.strip()]
