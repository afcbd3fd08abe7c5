"""Derivative-word rewriting with a machine-checkable termination certificate.

Words are noncommutative products of layered derivative letters applied to
the solution ``u`` or to the data ``f``, ``f_i``.  Differentiating the
system converts lowest-layer letters into collapsed commutator letters one
layer up; the engine expands those inhomogeneous terms in closed form,
normalizes words by shifting commutator letters into layer order, and
certifies that the measure ``W = sum_k (r + 1 - k) h_k`` strictly drops at
every step until all letter counts reach zero.

Two modes share the same combinatorics: the abstract mode tracks letters
and layer profiles only (collapsed commutator letters carry just their
layer), while the exact mode instantiates every letter as an algebra
element and checks the rewrites as operator identities on polynomials.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .algebra import AlgebraElement, bracket
from .fields import SystemCoefficients, field_of_element
from .poly import PolyFunction


class RewriteError(Exception):
    pass


class NoShiftableLetter(RewriteError):
    pass


class ClassificationFailure(RewriteError):
    """A produced term fits none of the admissible bookkeeping cases."""

    def __init__(self, profile, term, detail=""):
        super().__init__(f"unclassifiable term {term} from {profile}: {detail}")
        self.profile = profile
        self.term = term


class DepthExceeded(RewriteError):
    pass


# ---------------------------------------------------------------------------
# letters, words, profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Letter:
    """A derivative letter; ``index == 0`` marks a collapsed commutator
    letter (or an index left unspecified), known only by its layer."""

    layer: int
    index: int = 0

    @property
    def is_anonymous(self):
        return self.index == 0

    def __repr__(self):
        if self.index == 0:
            return f"X^{self.layer}"
        return f"X({self.layer},{self.index})"


Word = tuple  # tuple[Letter, ...]; leftmost letter is applied last
DerivativeWord = Word


def word_str(word) -> str:
    return "·".join(repr(let) for let in word) if word else "1"


@dataclass(frozen=True)
class SymbolicTerm:
    word: Word
    target: str  # "u" | "f" | "fi"
    kind: str    # "V" | "f-term" | "fi-term" | "commutator-remainder"
    family: str

    def __repr__(self):
        return f"<{self.family}: {word_str(self.word)} {self.target}>"


class LayerProfile:
    """Per-layer letter counts ``h_1..h_r`` with the termination measure W."""

    __slots__ = ("r", "counts")

    def __init__(self, r, counts):
        counts = tuple(int(c) for c in counts)
        if len(counts) != r:
            raise ValueError(f"need {r} layer counts, got {len(counts)}")
        if any(c < 0 for c in counts):
            raise ValueError("negative layer count")
        self.r = r
        self.counts = counts

    @staticmethod
    def from_mapping(r, mapping):
        return LayerProfile(r, [mapping.get(k, 0) for k in range(1, r + 1)])

    def count(self, layer):
        return self.counts[layer - 1]

    def with_count(self, layer, value):
        counts = list(self.counts)
        counts[layer - 1] = value
        return LayerProfile(self.r, counts)

    def total(self):
        return sum(self.counts)

    def w_measure(self):
        return sum((self.r + 1 - k) * c for k, c in enumerate(self.counts, start=1))

    def lowest_layer(self):
        for k, c in enumerate(self.counts, start=1):
            if c:
                return k
        return None

    def is_zero(self):
        return not any(self.counts)

    def only_top_layer(self):
        return not any(self.counts[:-1]) and self.counts[-1] > 0

    def middle_is_empty(self):
        low = self.lowest_layer()
        if low is None or low == self.r:
            return True
        return not any(self.counts[low: self.r - 1])

    def __eq__(self, other):
        return (
            isinstance(other, LayerProfile)
            and self.r == other.r
            and self.counts == other.counts
        )

    def __hash__(self):
        return hash((self.r, self.counts))

    def __repr__(self):
        return f"P{list(self.counts)}"


def word_profile(word, r) -> LayerProfile:
    """Letter counts of a word; valid only for words within the step."""
    counts = [0] * r
    for let in word:
        if let.layer > r:
            raise ValueError("word contains an annihilated letter")
        counts[let.layer - 1] += 1
    return LayerProfile(r, counts)


# ---------------------------------------------------------------------------
# closed-form expansion of the inhomogeneous terms
# ---------------------------------------------------------------------------

def _default_assignment(profile):
    """Distinct positional indices per layer, written top-down in words."""
    return {
        k: tuple(range(1, profile.count(k) + 1))
        for k in range(1, profile.r + 1)
    }


def _block(layer, positions, assignment):
    """Letters of one layer at the given positions, top position first."""
    idx = assignment[layer]
    return tuple(Letter(layer, idx[pos - 1]) for pos in positions)


def _block_top(layer, b, q, assignment):
    # the top q of b positions: b, b-1, ..., b-q+1
    return _block(layer, range(b, b - q, -1), assignment)


def _block_bottom(layer, k, assignment):
    return _block(layer, range(k, 0, -1), assignment)


def _stack(profile, from_layer, to_layer, assignment):
    out = ()
    for k in range(from_layer, to_layer + 1):
        out += _block_bottom(k, profile.count(k), assignment)
    return out


def expand_fi(l, profile, assignment=None):
    """Closed-form expansion of the flux-side inhomogeneous term.

    ``profile`` carries the letter counts, with ``profile.count(l-1)`` the
    number of lowest-layer derivatives already applied.  Families:
    the lowest-layer commutator family, one insertion family per higher
    layer that still carries letters, and a single pure-data word.
    """
    if assignment is None:
        assignment = _default_assignment(profile)
    r = profile.r
    b = profile.count(l - 1)
    terms = []
    # lowest-layer family: one letter of layer l-1 collapses into layer l
    for k in range(b - 1, -1, -1):
        q = b - 1 - k
        word = (
            _block_top(l - 1, b, q, assignment)
            + (Letter(l),)
            + _block_bottom(l - 1, k, assignment)
            + _stack(profile, l, r, assignment)
        )
        terms.append(SymbolicTerm(word, "u", "V", "fi-V"))
    # insertion families: a letter of layer s-1 collapses into layer s
    for s in range(l + 1, r + 1):
        hs = profile.count(s - 1)
        prefix_low = _block_bottom(l - 1, b, assignment) + _stack(
            profile, l, s - 2, assignment
        )
        for k in range(hs - 1, -1, -1):
            q = hs - 1 - k
            word = (
                prefix_low
                + _block_top(s - 1, hs, q, assignment)
                + (Letter(s),)
                + _block_bottom(s - 1, k, assignment)
                + _stack(profile, s, r, assignment)
            )
            terms.append(SymbolicTerm(word, "u", "V", "fi-T"))
    # pure data word
    data_word = _block_bottom(l - 1, b, assignment) + _stack(profile, l, r, assignment)
    terms.append(SymbolicTerm(data_word, "fi", "fi-term", "fi-data"))
    return terms


_INNER_FAMILY = {
    # outer level-l branch          # outer insertion branch
    "fi-V": {"l": "P3", "s": "P5"},
    "fi-T": {"l": "P4", "s": "P6"},
    "fi-data": {"l": "f-fi-data", "s": "f-fi-data"},
}


def expand_f(l, profile, assignment=None):
    """Closed-form expansion of the source-side inhomogeneous term.

    Substitutes the flux-side expansion into its own recursion, producing
    the six structural families P1..P6 plus the data words.
    """
    if assignment is None:
        assignment = _default_assignment(profile)
    r = profile.r
    b = profile.count(l - 1)
    terms = []
    full_word = _block_bottom(l - 1, b, assignment) + _stack(profile, l, r, assignment)
    terms.append(SymbolicTerm(full_word, "f", "f-term", "f-data"))
    # P1: lowest-layer collapse with one extra horizontal derivative
    for k in range(b - 1, -1, -1):
        q = b - 1 - k
        word = (
            _block_top(l - 1, b, q, assignment)
            + (Letter(l), Letter(1))
            + _block_bottom(l - 1, k, assignment)
            + _stack(profile, l, r, assignment)
        )
        terms.append(SymbolicTerm(word, "u", "V", "P1"))
    for s in range(l + 1, r + 1):
        hs = profile.count(s - 1)
        prefix_low = _block_bottom(l - 1, b, assignment) + _stack(
            profile, l, s - 2, assignment
        )
        for k in range(hs - 1, -1, -1):
            q = hs - 1 - k
            head = prefix_low + _block_top(s - 1, hs, q, assignment) + (Letter(s),)
            # P2: collapse at layer s with the extra horizontal derivative
            word = (
                head
                + (Letter(1),)
                + _block_bottom(s - 1, k, assignment)
                + _stack(profile, s, r, assignment)
            )
            terms.append(SymbolicTerm(word, "u", "V", "P2"))
            # flux-side terms at the insertion point
            for inner in expand_fi(s, profile.with_count(s - 1, k), assignment):
                terms.append(
                    SymbolicTerm(
                        head + inner.word,
                        inner.target,
                        inner.kind,
                        _INNER_FAMILY[inner.family]["s"],
                    )
                )
    # flux-side terms below the lowest layer
    for k in range(b - 1, -1, -1):
        q = b - 1 - k
        head = _block_top(l - 1, b, q, assignment) + (Letter(l),)
        for inner in expand_fi(l, profile.with_count(l - 1, k), assignment):
            terms.append(
                SymbolicTerm(
                    head + inner.word,
                    inner.target,
                    inner.kind,
                    _INNER_FAMILY[inner.family]["l"],
                )
            )
    return terms


# ---------------------------------------------------------------------------
# commutator shifting and word normalization
# ---------------------------------------------------------------------------

def shift_commutator(word, position=None):
    """Shift a collapsed commutator letter right past a lower-layer block.

    Returns the principal term (letter moved past the block) followed by
    the remainder terms of the displayed sum bounds, each carrying one
    collapsed letter of the merged layer in place of the pair.
    """
    word = tuple(word)
    if position is None:
        position = next(
            (
                z
                for z, let in enumerate(word)
                if let.is_anonymous
                and z + 1 < len(word)
                and word[z + 1].layer == let.layer - 1
            ),
            None,
        )
        if position is None:
            raise NoShiftableLetter(f"no shiftable letter in {word_str(word)}")
    mover = word[position]
    lower = mover.layer - 1
    if not (mover.is_anonymous and position + 1 < len(word)
            and word[position + 1].layer == lower):
        raise NoShiftableLetter(
            f"letter at {position} does not head a lower-layer block"
        )
    q = 0
    z = position - 1
    while z >= 0 and word[z].layer == lower:
        q += 1
        z -= 1
    k = 0
    z = position + 1
    while z < len(word) and word[z].layer == lower:
        k += 1
        z += 1
    block_end = position + 1 + k
    principal = (
        word[:position]
        + word[position + 1: block_end]
        + (mover,)
        + word[block_end:]
    )
    terms = [SymbolicTerm(principal, "u", "V", "L4-principal")]
    merged = Letter(mover.layer + lower)
    left_block = word[position - q: position]
    right_block = word[position + 1: block_end]
    both = left_block + right_block
    for s in range(q + k):
        rem = (
            word[: position - q]
            + both[:s]
            + (merged,)
            + both[s + 1:]
            + word[block_end:]
        )
        terms.append(SymbolicTerm(rem, "u", "commutator-remainder", "L4-shift"))
    return terms


def normalize_word(word, r):
    """Sort a word into layer order, collecting commutator remainders.

    Returns ``(principal, remainders)``: the principal word has
    non-decreasing layers; every swap of an out-of-order pair spawns a
    remainder with the pair collapsed one layer up, recursively normalized.
    Words containing a letter beyond layer ``r`` vanish; a vanished
    principal comes back as ``None``.
    """
    principal = None
    remainders = []
    stack = [(tuple(word), True)]
    while stack:
        w, is_principal = stack.pop()
        if any(let.layer > r for let in w):
            continue
        swap_at = None
        for z in range(len(w) - 1):
            if w[z].layer > w[z + 1].layer:
                swap_at = z
                break
        if swap_at is None:
            if is_principal:
                principal = w
            else:
                remainders.append(w)
            continue
        a, b = w[swap_at], w[swap_at + 1]
        swapped = w[:swap_at] + (b, a) + w[swap_at + 2:]
        merged = w[:swap_at] + (Letter(a.layer + b.layer),) + w[swap_at + 2:]
        stack.append((swapped, is_principal))
        stack.append((merged, False))
    return principal, remainders


def _strip_absorbed_horizontal(word):
    """Drop the single leading horizontal letter absorbed by the norm."""
    n = 0
    while n < len(word) and word[n].layer == 1:
        n += 1
    if n > 1:
        raise RewriteError(f"more than one leading horizontal letter: {word_str(word)}")
    return word[n:]


def classify_successor(profile, term):
    """Profile of a normalized solution term with its admissible case tag.

    Tags: ``total-decrease``, ``case-i`` (fewer lowest-layer letters at
    equal total) and ``case-ii`` (equal lowest count, mass moved one layer
    up somewhere above).  Raises :class:`ClassificationFailure` otherwise.
    """
    if term.target != "u":
        raise ValueError("only solution terms have successor profiles")
    word = _strip_absorbed_horizontal(term.word)
    succ = word_profile(word, profile.r)
    low = profile.lowest_layer()
    if succ.total() < profile.total():
        return succ, "total-decrease"
    if succ.total() == profile.total():
        if succ.count(low) < profile.count(low):
            return succ, "case-i"
        if succ.count(low) == profile.count(low):
            for beta in range(low + 1, profile.r):
                if succ.count(beta) < profile.count(beta) and succ.count(
                    beta + 1
                ) > profile.count(beta + 1):
                    return succ, "case-ii"
        raise ClassificationFailure(profile, term, "equal total, no admissible case")
    raise ClassificationFailure(profile, term, "total letter count grew")


# ---------------------------------------------------------------------------
# single iteration steps and the reduction driver
# ---------------------------------------------------------------------------

_RULE_OF_FAMILY = {
    "fi-V": "T1-Q2",
    "fi-T": "T1-Q1",
    "P1": "T1-P1",
    "P2": "T1-P2",
    "P3": "T1-P3",
    "P4": "T1-P4",
    "P5": "T1-P5",
    "P6": "T1-P6",
}


@dataclass(frozen=True)
class Successor:
    profile: LayerProfile
    rule: str
    case: str
    family: str


def _expansion_successors(profile, rule_of_family):
    """All successor profiles of one differentiation step on ``profile``.

    The step peels one lowest-layer derivative: the remaining word is one
    such successor, and the inhomogeneous data of its system (expanded in
    closed form, with and without one more derivative from any layer at or
    above the lowest) supplies the rest.
    """
    r = profile.r
    low = profile.lowest_layer()
    c = profile.count(low)
    data_profile = profile.with_count(low, c - 1)
    succ = [
        Successor(data_profile, "energy", "total-decrease", "energy")
    ]
    l = low + 1
    raw = expand_f(l, data_profile) + expand_fi(l, data_profile)
    prefixes = [None] + [Letter(j) for j in range(low, r + 1)]
    for term in raw:
        if term.target != "u":
            continue
        for prefix in prefixes:
            word = ((prefix,) if prefix else ()) + term.word
            principal, remainders = normalize_word(word, r)
            if principal is not None:
                p_term = SymbolicTerm(principal, "u", term.kind, term.family)
                prof, case = classify_successor(profile, p_term)
                succ.append(
                    Successor(prof, rule_of_family.get(term.family, "T2"), case, term.family)
                )
            for rem in remainders:
                r_term = SymbolicTerm(rem, "u", "commutator-remainder", "L4-shift")
                prof, case = classify_successor(profile, r_term)
                succ.append(Successor(prof, "L4-shift", case, "L4-shift"))
    return succ


def t2_step(profile):
    """Step for profiles populated only at the lowest and top layers.

    Returns ``(successors, certificate)``; the certificate asserts that
    every successor lost at least one lowest-layer letter without losing
    mass anywhere else and without increasing the total.
    """
    r = profile.r
    low = profile.lowest_layer()
    if low is None:
        return [], {"rule": "T2", "ok": True, "checks": []}
    if not profile.middle_is_empty():
        raise ValueError("t2 step needs an empty middle range")
    if low == r:
        raise ValueError("top-layer-only profiles reduce by the top-layer iteration")
    succ = _expansion_successors(profile, rule_of_family={})
    checks = []
    for s in succ:
        ok = (
            s.profile.total() <= profile.total()
            and s.profile.count(low) <= profile.count(low) - 1
            and all(
                s.profile.count(k) >= profile.count(k)
                for k in range(1, r + 1)
                if k != low
            )
        )
        checks.append({"profile": list(s.profile.counts), "ok": ok})
        if not ok:
            raise ClassificationFailure(
                profile, s, "successor violates the two-layer certificate"
            )
    certificate = {
        "rule": "T2",
        "ok": True,
        "lowest_layer": low,
        "checks": checks,
    }
    return succ, certificate


@dataclass(frozen=True)
class TraceStep:
    rule: str
    in_profile: LayerProfile
    out_profiles: tuple
    w_in: int
    w_out: int

    def to_json(self):
        return {
            "rule": self.rule,
            "in_profile": list(self.in_profile.counts),
            "out_profiles": [list(p.counts) for p in self.out_profiles],
            "W_in": self.w_in,
            "W_out": self.w_out,
        }


class ReductionTrace:
    """Replayable record of one reduction to the zero profile."""

    def __init__(self, initial, steps):
        self.initial = initial
        self.steps = list(steps)

    def __len__(self):
        return len(self.steps)

    def to_json(self):
        return {
            "r": self.initial.r,
            "initial": list(self.initial.counts),
            "steps": [s.to_json() for s in self.steps],
        }

    @staticmethod
    def from_json(data):
        r = int(data["r"])
        steps = [
            TraceStep(
                s["rule"],
                LayerProfile(r, s["in_profile"]),
                tuple(LayerProfile(r, p) for p in s["out_profiles"]),
                int(s["W_in"]),
                int(s["W_out"]),
            )
            for s in data["steps"]
        ]
        return ReductionTrace(LayerProfile(r, data["initial"]), steps)

    def replay(self):
        """Re-run every step and confirm the recorded successor sets."""
        for step in self.steps:
            recomputed = _step_successors(step.in_profile)[1]
            got = tuple(sorted({s.profile.counts for s in recomputed}))
            want = tuple(sorted(p.counts for p in step.out_profiles))
            if got != want:
                return False
            if step.w_in != step.in_profile.w_measure():
                return False
            if step.out_profiles and step.w_out != max(
                p.w_measure() for p in step.out_profiles
            ):
                return False
            if step.w_out >= step.w_in:
                return False
        return True


def _step_successors(profile):
    """Dispatch one reduction step; returns (default rule, successor list)."""
    r = profile.r
    if profile.only_top_layer():
        nxt = profile.with_count(r, profile.count(r) - 1)
        return "A", [Successor(nxt, "A", "total-decrease", "A")]
    if profile.middle_is_empty():
        succ, _ = t2_step(profile)
        succ = [Successor(s.profile, "T2", s.case, s.family) for s in succ]
        return "T2", succ
    return "T1", _expansion_successors(profile, _RULE_OF_FAMILY)


def reduce_to_base(initial: LayerProfile) -> ReductionTrace:
    """Iterate the reduction until every layer count is zero.

    Every step records all successor profiles and requires the measure W
    to drop strictly on each of them; the chain continues through the
    successor of largest W, so its length is bounded by W(initial).
    """
    low = initial.lowest_layer()
    if low == 1:
        raise ValueError("horizontal-layer letters are absorbed by the energy norm")
    steps = []
    profile = initial
    budget = initial.w_measure()
    while not profile.is_zero():
        if len(steps) >= budget:
            raise DepthExceeded(f"more steps than W({initial}) = {budget}")
        default_rule, succ = _step_successors(profile)
        w_in = profile.w_measure()
        for s in succ:
            if s.profile.w_measure() >= w_in:
                raise ClassificationFailure(
                    profile, s, f"W did not decrease: {s.profile}"
                )
        # deterministic continuation: largest W, then largest counts
        chosen = max(succ, key=lambda s: (s.profile.w_measure(), s.profile.counts))
        rule = chosen.rule if default_rule == "T1" else default_rule
        out = tuple(
            sorted(
                {s.profile for s in succ},
                key=lambda p: (p.w_measure(), p.counts),
                reverse=True,
            )
        )
        steps.append(TraceStep(rule, profile, out, w_in, out[0].w_measure()))
        profile = chosen.profile
    return ReductionTrace(initial, steps)


def termination_sweep(r, max_total):
    """Exhaustively reduce every profile of the given step with bounded
    total letters (lowest layer >= 2); returns a summary report."""
    report = {
        "r": r,
        "max_total": max_total,
        "profiles": 0,
        "max_trace": 0,
        "classification_failures": 0,
        "w_violations": 0,
    }
    ranges = [range(max_total + 1)] * (r - 1)
    for counts in itertools.product(*ranges):
        if sum(counts) > max_total or not any(counts):
            continue
        profile = LayerProfile(r, (0,) + counts)
        report["profiles"] += 1
        trace = reduce_to_base(profile)
        report["max_trace"] = max(report["max_trace"], len(trace))
        for step in trace.steps:
            if step.w_out >= step.w_in:
                report["w_violations"] += 1
    return report


# ---------------------------------------------------------------------------
# the step-4 ordering obstruction
# ---------------------------------------------------------------------------

def naive_order_obstruction():
    """Replay the failure of naive differentiation order on a step-4 group.

    Target: one derivative in each of the layers 2, 3, 4, taken top-down.
    Differentiating along the top two layers is assumed; the data term of
    the once-more-differentiated system carries a commutator that absorbs
    the layer-3 letter into layer 4.  Differentiating along layer 2 then
    leaves as many layer-2 letters on the right-hand side as the target
    has, so the scheme cannot close; the other directions stay inside the
    standing assumption.
    """
    r = 4
    target = LayerProfile(r, (0, 1, 1, 1))
    commuted = (Letter(4), Letter(4, 1))  # layer-3 letter absorbed into layer 4
    cases = []
    for z in (2, 3, 4):
        word = (Letter(z, 1),) + commuted
        prof = word_profile(word, r)
        covered = prof.count(2) == 0
        obstruction = not covered and prof.count(2) >= target.count(2)
        cases.append(
            {
                "direction": [z, 1],
                "u_term": word_str(word),
                "data_term": word_str((Letter(z, 1), Letter(3, 1), Letter(4, 1)))
                + " f_i (bounded: data is smooth)",
                "profile": list(prof.counts),
                "W": prof.w_measure(),
                "covered_by_assumption": covered,
                "obstruction": obstruction,
                "reason": (
                    "lowest-layer derivative count does not decrease; the "
                    "derivative appears on both sides"
                    if obstruction
                    else "no lowest-layer derivative; covered by the assumption"
                ),
            }
        )
    return {
        "step": r,
        "target_profile": list(target.counts),
        "target_W": target.w_measure(),
        "assumed_layers": [3, 4],
        "cases": cases,
        "obstructed_directions": [c["direction"] for c in cases if c["obstruction"]],
        "note": (
            "the obstructing term is smaller in W, which is exactly what the "
            "ordered iteration exploits; the naive order has no decreasing "
            "measure for it"
        ),
    }


# ---------------------------------------------------------------------------
# exact mode: rewrites as operator identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactTerm:
    """Rational multiple of a composition of left-invariant operators
    applied to one target; ``ops[0]`` acts last."""

    coeff: Fraction
    ops: tuple          # tuple[AlgebraElement, ...]
    target: object      # "u" | "f" | ("fi", i)


def _exact_apply(spec, terms, u, f, f_i):
    total = PolyFunction.zero()
    for term in terms:
        if term.target == "u":
            poly = u
        elif term.target == "f":
            poly = f
        else:
            poly = f_i[term.target[1] - 1]
        for op in reversed(term.ops):
            if op.is_zero():
                poly = PolyFunction.zero()
                break
            poly = field_of_element(spec, op).apply(poly)
            if poly.is_zero():
                break
        total = total + poly.scale(term.coeff)
    return total


def _basis_elem(spec, layer, index):
    return AlgebraElement.basis(spec, (layer, index))


class ExactContext:
    """Concrete letters for an exact rewrite check.

    Letter indices above the layer dimension wrap around, so abstract
    positional assignments map onto any spec.
    """

    def __init__(self, spec, A: SystemCoefficients):
        if A.n_components != 1:
            raise ValueError("exact checks run on single-component systems")
        if A.m != spec.m:
            raise ValueError("coefficient block does not match the spec")
        self.spec = spec
        self.A = A
        # Y_i = sum_j A_ij X_j
        self.Y = [
            AlgebraElement(
                spec,
                {
                    (1, j): A.entry(0, 0, i - 1, j - 1)
                    for j in range(1, spec.m + 1)
                },
            )
            for i in range(1, spec.m + 1)
        ]

    def basis(self, layer, position):
        dim = self.spec.layer_dims[layer - 1]
        index = (position - 1) % dim + 1
        return _basis_elem(self.spec, layer, index)

    def block_ops(self, layer, positions):
        return tuple(self.basis(layer, pos) for pos in positions)

    def stack_ops(self, profile, from_layer, to_layer):
        out = ()
        for k in range(from_layer, to_layer + 1):
            out += self.block_ops(k, range(profile.count(k), 0, -1))
        return out


def exact_fi_recursive(ctx, l, profile):
    """Unroll the recursive definition of the flux-side data, per slot i."""
    spec, A = ctx.spec, ctx.A
    r = profile.r
    m = spec.m

    def rec(level, b):
        if b == 0:
            if level == r:
                stack = ctx.stack_ops(profile, r, r)
                return [
                    [ExactTerm(Fraction(1), stack, ("fi", i))]
                    for i in range(1, m + 1)
                ]
            return rec(level + 1, profile.count(level))
        prev = rec(level, b - 1)
        letter = ctx.basis(level - 1, b)
        v_ops = ctx.block_ops(level - 1, range(b - 1, 0, -1)) + ctx.stack_ops(
            profile, level, r
        )
        out = []
        for i in range(1, m + 1):
            commutator = bracket(letter, ctx.Y[i - 1])
            terms = [ExactTerm(Fraction(1), (commutator,) + v_ops, "u")]
            terms += [
                ExactTerm(t.coeff, (letter,) + t.ops, t.target) for t in prev[i - 1]
            ]
            out.append(terms)
        return out

    return rec(l, profile.count(l - 1))


def exact_f_recursive(ctx, l, profile):
    """Unroll the recursive definition of the source-side data."""
    spec = ctx.spec
    r = profile.r
    m = spec.m

    def rec(level, b):
        if b == 0:
            if level == r:
                return [ExactTerm(Fraction(1), ctx.stack_ops(profile, r, r), "f")]
            return rec(level + 1, profile.count(level))
        prev = rec(level, b - 1)
        prev_fi = _exact_fi_at(ctx, level, b - 1, profile)
        letter = ctx.basis(level - 1, b)
        v_ops = ctx.block_ops(level - 1, range(b - 1, 0, -1)) + ctx.stack_ops(
            profile, level, r
        )
        out = [ExactTerm(t.coeff, (letter,) + t.ops, t.target) for t in prev]
        for i in range(1, m + 1):
            commutator = bracket(_basis_elem(spec, 1, i), letter)
            out.append(
                ExactTerm(Fraction(1), (commutator, ctx.Y[i - 1]) + v_ops, "u")
            )
            out += [
                ExactTerm(t.coeff, (commutator,) + t.ops, t.target)
                for t in prev_fi[i - 1]
            ]
        return out

    return rec(l, profile.count(l - 1))


def _exact_fi_at(ctx, level, b, profile):
    """Flux-side recursion rebased at ``level`` with ``b`` lowest letters."""
    return exact_fi_recursive(ctx, level, profile.with_count(level - 1, b))


def exact_fi_closed(ctx, l, profile):
    """Closed-form flux-side expansion with exact letters, per slot i."""
    spec = ctx.spec
    r = profile.r
    b = profile.count(l - 1)
    out = [[] for _ in range(spec.m)]
    for i in range(1, spec.m + 1):
        for k in range(b - 1, -1, -1):
            q = b - 1 - k
            top = ctx.block_ops(l - 1, range(b, b - q, -1))
            commutator = bracket(ctx.basis(l - 1, k + 1), ctx.Y[i - 1])
            tail = ctx.block_ops(l - 1, range(k, 0, -1)) + ctx.stack_ops(
                profile, l, r
            )
            out[i - 1].append(
                ExactTerm(Fraction(1), top + (commutator,) + tail, "u")
            )
        for s in range(l + 1, r + 1):
            hs = profile.count(s - 1)
            prefix = ctx.block_ops(l - 1, range(b, 0, -1)) + ctx.stack_ops(
                profile, l, s - 2
            )
            for k in range(hs - 1, -1, -1):
                q = hs - 1 - k
                top = ctx.block_ops(s - 1, range(hs, hs - q, -1))
                commutator = bracket(ctx.basis(s - 1, k + 1), ctx.Y[i - 1])
                tail = ctx.block_ops(s - 1, range(k, 0, -1)) + ctx.stack_ops(
                    profile, s, r
                )
                out[i - 1].append(
                    ExactTerm(Fraction(1), prefix + top + (commutator,) + tail, "u")
                )
        data_ops = ctx.block_ops(l - 1, range(b, 0, -1)) + ctx.stack_ops(profile, l, r)
        out[i - 1].append(ExactTerm(Fraction(1), data_ops, ("fi", i)))
    return out


def exact_f_closed(ctx, l, profile):
    """Closed-form source-side expansion with exact letters."""
    spec = ctx.spec
    r = profile.r
    m = spec.m
    b = profile.count(l - 1)
    out = [
        ExactTerm(
            Fraction(1),
            ctx.block_ops(l - 1, range(b, 0, -1)) + ctx.stack_ops(profile, l, r),
            "f",
        )
    ]
    for k in range(b - 1, -1, -1):
        q = b - 1 - k
        top = ctx.block_ops(l - 1, range(b, b - q, -1))
        consumed = ctx.basis(l - 1, k + 1)
        tail = ctx.block_ops(l - 1, range(k, 0, -1)) + ctx.stack_ops(profile, l, r)
        inner_fi = exact_fi_closed(ctx, l, profile.with_count(l - 1, k))
        for i in range(1, m + 1):
            commutator = bracket(_basis_elem(spec, 1, i), consumed)
            out.append(
                ExactTerm(Fraction(1), top + (commutator, ctx.Y[i - 1]) + tail, "u")
            )
            out += [
                ExactTerm(t.coeff, top + (commutator,) + t.ops, t.target)
                for t in inner_fi[i - 1]
            ]
    for s in range(l + 1, r + 1):
        hs = profile.count(s - 1)
        prefix = ctx.block_ops(l - 1, range(b, 0, -1)) + ctx.stack_ops(
            profile, l, s - 2
        )
        for k in range(hs - 1, -1, -1):
            q = hs - 1 - k
            top = ctx.block_ops(s - 1, range(hs, hs - q, -1))
            consumed = ctx.basis(s - 1, k + 1)
            tail = ctx.block_ops(s - 1, range(k, 0, -1)) + ctx.stack_ops(
                profile, s, r
            )
            inner_fi = exact_fi_closed(ctx, s, profile.with_count(s - 1, k))
            for i in range(1, m + 1):
                commutator = bracket(_basis_elem(spec, 1, i), consumed)
                out.append(
                    ExactTerm(
                        Fraction(1), prefix + top + (commutator, ctx.Y[i - 1]) + tail, "u"
                    )
                )
                out += [
                    ExactTerm(t.coeff, prefix + top + (commutator,) + t.ops, t.target)
                    for t in inner_fi[i - 1]
                ]
    return out


def verify_rewrite_identity(
    spec,
    rule,
    u,
    f=None,
    f_i=None,
    A=None,
    profile=None,
    l=None,
    shift_params=None,
):
    """Exact check that a rewrite is an operator identity on polynomials.

    ``rule`` is one of ``"shift"`` (the commutator shift), ``"expand_fi"``
    or ``"expand_f"`` (closed form against the raw recursive definition).
    Returns a report dict with an ``ok`` flag and both sides' fingerprints.
    """
    if A is None:
        A = SystemCoefficients.identity(1, spec.m)
    if f is None:
        f = PolyFunction.zero()
    if f_i is None:
        f_i = [PolyFunction.zero() for _ in range(spec.m)]
    ctx = ExactContext(spec, A)
    if rule == "shift":
        q, k, l_shift = shift_params
        if l_shift < 2 or l_shift > spec.r:
            raise ValueError("shift layer out of range")
        lower = l_shift - 1
        mover = bracket(ctx.basis(lower, k + 1), ctx.Y[0])
        left = ctx.block_ops(lower, range(q + k, k, -1))
        right = ctx.block_ops(lower, range(k, 0, -1))
        lhs_terms = [ExactTerm(Fraction(1), left + (mover,) + right, "u")]
        rhs_terms = [ExactTerm(Fraction(1), left + right + (mover,), "u")]
        for j in range(k):
            rhs_terms.append(
                ExactTerm(
                    Fraction(1),
                    left + right[:j] + (bracket(mover, right[j]),) + right[j + 1:],
                    "u",
                )
            )
        lhs = _exact_apply(spec, lhs_terms, u, f, f_i)
        rhs = _exact_apply(spec, rhs_terms, u, f, f_i)
    elif rule in ("expand_fi", "expand_f"):
        if profile is None or l is None:
            raise ValueError("expansion checks need a profile and a level")
        if rule == "expand_fi":
            closed = exact_fi_closed(ctx, l, profile)
            recursive = exact_fi_recursive(ctx, l, profile)
            lhs = PolyFunction.zero()
            rhs = PolyFunction.zero()
            for i in range(spec.m):
                lhs = lhs + _exact_apply(spec, closed[i], u, f, f_i)
                rhs = rhs + _exact_apply(spec, recursive[i], u, f, f_i)
        else:
            closed = exact_f_closed(ctx, l, profile)
            recursive = exact_f_recursive(ctx, l, profile)
            lhs = _exact_apply(spec, closed, u, f, f_i)
            rhs = _exact_apply(spec, recursive, u, f, f_i)
    else:
        raise ValueError(f"unknown rewrite rule {rule!r}")
    return {
        "rule": rule,
        "ok": lhs == rhs,
        "lhs_terms": len(lhs.terms),
        "rhs_terms": len(rhs.terms),
    }
