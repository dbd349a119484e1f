"""Motion state diagram and constrained sequence decoding.

Human activity is cast as four states (walking, standing, sitting, laying),
duplicated into toward/away radar-facing groups (sitting is modelled
direction-agnostic).  Fifteen motion classes label the transitions; walking
merged actions (I-IV, XIV) and the start-walking action (XV) are tied to
the translation breaking points, the rest are in-place actions.  The
decoders walk the capture list chronologically (forward) or reversed
(backward), at each event restricting the classifier to the classes that
the diagram allows out of (or into) the plausible states, never inventing
a transition and never allowing the same in-place action twice in a row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .pbc import MotionSegment

# state names: base kind + facing group; sitting carries no group
WALK_T, WALK_A = "walk_toward", "walk_away"
STAND_T, STAND_A = "stand_toward", "stand_away"
SIT = "sit"
LAY_T, LAY_A = "lay_toward", "lay_away"
STATES = (WALK_T, WALK_A, STAND_T, STAND_A, SIT, LAY_T, LAY_A)

ROMAN = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII",
         "IX", "X", "XI", "XII", "XIII", "XIV", "XV")

# edge categories: 'merged_exit' leave walking, 'ws_entry' enter walking,
# 'inplace' connect non-walking states
MERGED_EXIT, INPLACE, WS_ENTRY = "merged_exit", "inplace", "ws_entry"


class DecodeInconsistencyError(RuntimeError):
    def __init__(self, segment_index: int, message: str):
        super().__init__(f"segment {segment_index}: {message}")
        self.segment_index = segment_index


@dataclass(frozen=True)
class MotionClass:
    id: str
    name: str
    edges: tuple[tuple[str, str], ...]   # (from_state, to_state) pairs
    direction: str                       # 'toward' | 'away' | 'either'
    category: str                        # merged_exit | inplace | ws_entry

    @property
    def merged_with_translation(self) -> bool:
        return self.category in (MERGED_EXIT, WS_ENTRY) and self.id != "XV"


def _cls(cid, name, edges, direction, category):
    return MotionClass(cid, name, tuple(edges), direction, category)


MOTION_CLASSES: dict[str, MotionClass] = {c.id: c for c in [
    _cls("I", "walking-stop/bend toward", [(WALK_T, STAND_T)], "toward", MERGED_EXIT),
    _cls("II", "walking-fall toward", [(WALK_T, LAY_T)], "toward", MERGED_EXIT),
    _cls("III", "walking-stop/bend away", [(WALK_A, STAND_A)], "away", MERGED_EXIT),
    _cls("IV", "walking-fall away", [(WALK_A, LAY_A)], "away", MERGED_EXIT),
    _cls("V", "sitting down", [(STAND_T, SIT), (STAND_A, SIT)], "either", INPLACE),
    _cls("VI", "bending while standing toward", [(STAND_T, STAND_T)], "toward", INPLACE),
    _cls("VII", "bending while standing away", [(STAND_A, STAND_A)], "away", INPLACE),
    _cls("VIII", "falling from standing toward", [(STAND_T, LAY_T)], "toward", INPLACE),
    _cls("IX", "falling from standing away", [(STAND_A, LAY_A)], "away", INPLACE),
    _cls("X", "standing up from falling toward", [(LAY_T, STAND_T)], "toward", INPLACE),
    _cls("XI", "standing up from falling away", [(LAY_A, STAND_A)], "away", INPLACE),
    _cls("XII", "standing up from sitting", [(SIT, STAND_T)], "toward", INPLACE),
    _cls("XIII", "bending while sitting", [(SIT, SIT)], "either", INPLACE),
    _cls("XIV", "standing up merged with walking",
         [(SIT, WALK_T), (SIT, WALK_A)], "either", WS_ENTRY),
    _cls("XV", "start walking",
         [(STAND_T, WALK_T), (STAND_A, WALK_A)], "either", WS_ENTRY),
]}

TURN_EDGES = ((STAND_T, STAND_A), (STAND_A, STAND_T))


@dataclass
class StateDiagram:
    states: tuple[str, ...] = STATES
    classes: dict[str, MotionClass] = field(default_factory=lambda: dict(MOTION_CLASSES))
    turn_edges: tuple[tuple[str, str], ...] = TURN_EDGES

    def validate(self) -> None:
        for c in self.classes.values():
            if not c.edges:
                raise ValueError(f"class {c.id} has no edge")
            for a, b in c.edges:
                if a not in self.states or b not in self.states:
                    raise ValueError(f"class {c.id} references unknown state")
        for lay in (LAY_T, LAY_A):
            outs = [c.id for c in self.classes.values()
                    if c.category == INPLACE and any(a == lay for a, _ in c.edges)]
            if len(outs) != 1:
                raise ValueError(f"{lay} must have exactly one outgoing in-place action")
        for walk in (WALK_T, WALK_A):
            outs = [c.id for c in self.classes.values()
                    if c.category == MERGED_EXIT and any(a == walk for a, _ in c.edges)]
            if len(outs) != 2:
                raise ValueError(f"{walk} must have exactly two merged exit class groups")

    def outgoing(self, state: str, category: str) -> list[str]:
        ids = [c.id for c in self.classes.values()
               if c.category == category and any(a == state for a, _ in c.edges)]
        return sorted(ids, key=ROMAN.index)

    def incoming(self, state: str, category: str) -> list[str]:
        ids = [c.id for c in self.classes.values()
               if c.category == category and any(b == state for _, b in c.edges)]
        return sorted(ids, key=ROMAN.index)

    def destinations(self, cid: str, from_states) -> set[str]:
        return {b for a, b in self.classes[cid].edges if a in from_states}

    def origins(self, cid: str, to_states) -> set[str]:
        return {a for a, b in self.classes[cid].edges if b in to_states}

    def to_json(self, path) -> None:
        doc = {
            "states": list(self.states),
            "turn_edges": [list(e) for e in self.turn_edges],
            "classes": [
                {"id": c.id, "name": c.name, "direction": c.direction,
                 "category": c.category, "edges": [list(e) for e in c.edges]}
                for c in self.classes.values()
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)

    @staticmethod
    def from_json(path) -> "StateDiagram":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        classes = {
            d["id"]: MotionClass(d["id"], d["name"],
                                 tuple(tuple(e) for e in d["edges"]),
                                 d["direction"], d["category"])
            for d in doc["classes"]
        }
        diagram = StateDiagram(states=tuple(doc["states"]), classes=classes,
                               turn_edges=tuple(tuple(e) for e in doc["turn_edges"]))
        diagram.validate()
        return diagram


DIAGRAM = StateDiagram()
DIAGRAM.validate()


# classifier registry: id -> (class set, d_md, d_rm); the sets and the
# component counts follow the per-classifier configurations
CLASSIFIER_REGISTRY: dict[int, tuple[frozenset, int, int]] = {
    1: (frozenset({"I", "II"}), 2, 1),
    2: (frozenset({"V", "VI", "VIII", "X"}), 6, 2),
    3: (frozenset({"XIV", "XV"}), 14, 4),
    4: (frozenset({"VI", "VII", "X", "XI", "XII"}), 7, 2),
    5: (frozenset({"V", "VI", "VIII"}), 6, 2),
    6: (frozenset({"XII", "XIII"}), 14, 4),
    7: (frozenset({"V", "XIII"}), 14, 4),
    8: (frozenset({"III", "IV"}), 10, 2),
    9: (frozenset({"V", "VII", "IX", "XI"}), 10, 2),
    10: (frozenset({"V", "VII", "IX", "XI", "XII", "XIII"}), 10, 2),
    11: (frozenset({"V", "VI", "VII", "VIII", "IX", "XI", "XII", "XIII"}), 10, 2),
}

_REGISTRY_BY_SET = {cls_set: cid for cid, (cls_set, _, _) in CLASSIFIER_REGISTRY.items()}

DEFAULT_DIMS = (14, 4)


def registry_lookup(class_ids) -> tuple[int | None, tuple[int, int]]:
    """Classifier id and (d_md, d_rm) for a class set; default dims if the
    set matches no registered configuration."""
    cid = _REGISTRY_BY_SET.get(frozenset(class_ids))
    if cid is None:
        return None, DEFAULT_DIMS
    _, d_md, d_rm = CLASSIFIER_REGISTRY[cid]
    return cid, (d_md, d_rm)


def _state(kind: str, group: str) -> str:
    if kind in ("sit", "SiS"):
        return SIT
    base = {"walk": "walk", "WS": "walk", "stand": "stand", "StS": "stand",
            "lay": "lay", "LS": "lay"}[kind]
    return f"{base}_{group}"


_EXPAND_PARTNER = {STAND_T: LAY_T, STAND_A: LAY_A, LAY_T: STAND_T, LAY_A: STAND_A}


def class_set(state: str, group: str = "toward", time_direction: str = "forward",
              uncertainty_expand: bool = False,
              diagram: StateDiagram = DIAGRAM) -> tuple[list[str], int | None]:
    """Allowed classes for a capture at ``state``, plus the classifier id.

    Forward queries return the outgoing classes (merged walk-exits for the
    walking state, in-place actions otherwise); backward queries return the
    incoming ones, with the standing state always considered
    bidirectionally since a turn may precede it.  ``uncertainty_expand``
    unions the standing and laying states of the group, modelling the
    follow-up classifier applied when a missed fall may have put the person
    in either state.
    """
    s = _state(state, group) if state in ("walk", "stand", "sit", "lay",
                                          "WS", "StS", "SiS", "LS") else state
    states = {s}
    if uncertainty_expand and s in _EXPAND_PARTNER:
        states.add(_EXPAND_PARTNER[s])
    ids: set[str] = set()
    if time_direction == "forward":
        for st in states:
            category = MERGED_EXIT if st.startswith("walk") else INPLACE
            ids.update(diagram.outgoing(st, category))
    elif time_direction == "backward":
        for st in states:
            if st.startswith("walk"):
                ids.update(diagram.incoming(st, WS_ENTRY))
            elif st.startswith("stand"):
                ids.update(diagram.incoming(STAND_T, INPLACE))
                ids.update(diagram.incoming(STAND_A, INPLACE))
            else:
                ids.update(diagram.incoming(st, INPLACE))
    else:
        raise ValueError("time_direction must be 'forward' or 'backward'")
    ordered = sorted(ids, key=ROMAN.index)
    cid, _ = registry_lookup(ordered)
    return ordered, cid


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

@dataclass
class DecodedEvent:
    segment: MotionSegment
    label: str | None              # motion class, walking pseudo-label, or None
    classifier_id: int | None
    margin: float | None
    state_after: str


@dataclass
class DecodedTimeline:
    events: list[DecodedEvent]
    direction: str                 # 'forward' | 'backward'

    def state_trace(self) -> list[str]:
        return [e.state_after for e in self.events]

    def base_trace(self) -> list[str]:
        return [e.state_after.split("_")[0] for e in self.events]


def _walk_label(direction: str) -> str:
    return f"walk_{direction}"


def make_model_classifier(model, snippets, k: int = 1, dims_by_id: dict | None = None):
    """Adapt a FeatureModel + per-segment snippets to the decoder interface.

    Returns classify(segment_index, class_ids, classifier_id, d_md, d_rm).
    ``dims_by_id`` may override component counts per classifier id.
    """
    from .features import nn_classify

    def classify(i, class_ids, classifier_id, d_md, d_rm):
        if dims_by_id and classifier_id in dims_by_id:
            d_md, d_rm = dims_by_id[classifier_id]
        d_md, d_rm = min(d_md, model.d_md), min(d_rm, model.d_rm)
        snippet = snippets[i]
        if snippet is None:
            raise DecodeInconsistencyError(i, "no snippet for a classifiable segment")
        vec = model.feature_vector(snippet, d_md=d_md, d_rm=d_rm)
        return nn_classify(vec, model, class_ids, k=k, d_md=d_md, d_rm=d_rm)

    return classify


def make_stub_classifier(truth_labels):
    """Perfect-classifier stub: returns the scripted label when it is in the
    offered set, otherwise the first offered class (margin 1.0)."""

    def classify(i, class_ids, classifier_id, d_md, d_rm):
        want = truth_labels[i]
        return (want if want in class_ids else class_ids[0]), 1.0

    return classify


def _classify_event(i, seg, candidates, classify, prev_class):
    cand = [c for c in candidates if c != prev_class]
    if not cand:
        raise DecodeInconsistencyError(i, f"no allowed class at {seg.source} event")
    cid, (d_md, d_rm) = registry_lookup(cand)
    label, margin = classify(i, tuple(cand), cid, d_md, d_rm)
    if label not in cand:
        raise DecodeInconsistencyError(i, f"classifier returned {label!r} outside {cand}")
    return cand, cid, label, margin


def decode_forward(segments: list[MotionSegment], classify,
                   margin_tau: float = 0.05,
                   diagram: StateDiagram = DIAGRAM) -> DecodedTimeline:
    """Forward pass: walk the captures in time order, restricting each
    classification to the diagram's outgoing classes of the plausible
    states.  A low margin keeps all offered destinations plausible for the
    next step; translation intervals reset the state to walking.
    """
    if not segments:
        return DecodedTimeline(events=[], direction="forward")
    plausible = {STAND_T}
    prev_class = None
    events: list[DecodedEvent] = []

    for i, seg in enumerate(segments):
        if seg.kind == "translation" and seg.source == "radon":
            state = _state("walk", seg.direction)
            plausible = {state}
            prev_class = None
            events.append(DecodedEvent(seg, _walk_label(seg.direction), None, None, state))
            continue

        if seg.kind == "translation" and seg.source == "merged":
            walk_state = _state("walk", seg.direction)
            stand_state = _state("stand", seg.direction)
            if not plausible & {SIT, stand_state}:
                # the person must have turned while standing; the capture
                # holds turn + walk and is not classified
                if any(s.startswith("stand") for s in plausible):
                    events.append(DecodedEvent(seg, None, None, None, walk_state))
                    plausible = {walk_state}
                    prev_class = None
                    continue
                raise DecodeInconsistencyError(i, f"walking cannot start from {plausible}")
            candidates = diagram.incoming(walk_state, WS_ENTRY)
            cand, cid, label, margin = _classify_event(i, seg, candidates, classify, prev_class)
            events.append(DecodedEvent(seg, label, cid, margin, walk_state))
            plausible = {walk_state}
            prev_class = None
            continue

        # in-place capture: merged walk-exit or PBC burst
        category = MERGED_EXIT if seg.source == "merged" else INPLACE
        candidates: set[str] = set()
        for st in plausible:
            candidates.update(diagram.outgoing(st, category))
        candidates = sorted(candidates, key=ROMAN.index)
        cand, cid, label, margin = _classify_event(i, seg, candidates, classify, prev_class)
        dests = diagram.destinations(label, plausible)
        if not dests:
            raise DecodeInconsistencyError(i, f"class {label} has no edge from {plausible}")
        state = sorted(dests)[0]
        if margin is not None and margin < margin_tau:
            plausible = set()
            for c in cand:
                plausible.update(diagram.destinations(c, set(STATES)))
        else:
            plausible = dests
        prev_class = label
        events.append(DecodedEvent(seg, label, cid, margin, state))

    return DecodedTimeline(events=events, direction="forward")


def decode_backward(segments: list[MotionSegment], classify,
                    margin_tau: float = 0.05,
                    diagram: StateDiagram = DIAGRAM) -> DecodedTimeline:
    """Backward pass: iterate the captures in reverse, classifying each with
    the incoming class sets of the state on its later side (standing is
    treated bidirectionally since turning hides the orientation)."""
    if not segments:
        return DecodedTimeline(events=[], direction="backward")
    current = {STAND_T}
    prev_class = None
    events: list[DecodedEvent] = []

    for i in range(len(segments) - 1, -1, -1):
        seg = segments[i]
        if seg.kind == "translation" and seg.source == "radon":
            state = _state("walk", seg.direction)
            current = {state}
            prev_class = None
            events.append(DecodedEvent(seg, _walk_label(seg.direction), None, None, state))
            continue

        if seg.kind == "translation" and seg.source == "merged":
            walk_state = _state("walk", seg.direction)
            candidates = diagram.incoming(walk_state, WS_ENTRY)
            cand, cid, label, margin = _classify_event(i, seg, candidates, classify, prev_class)
            origins = diagram.origins(label, {walk_state})
            events.append(DecodedEvent(seg, label, cid, margin, walk_state))
            if margin is not None and margin < margin_tau:
                current = set()
                for c in cand:
                    current.update(diagram.origins(c, {walk_state}))
            else:
                current = origins
            prev_class = label
            continue

        category = MERGED_EXIT if seg.source == "merged" else INPLACE
        candidates: set[str] = set()
        for st in current:
            if category == INPLACE and st.startswith("stand"):
                candidates.update(diagram.incoming(STAND_T, INPLACE))
                candidates.update(diagram.incoming(STAND_A, INPLACE))
            else:
                candidates.update(diagram.incoming(st, category))
        candidates = sorted(candidates, key=ROMAN.index)
        cand, cid, label, margin = _classify_event(i, seg, candidates, classify, prev_class)
        # the event's later-side state: prefer the destination consistent
        # with what has been decoded so far
        dests = diagram.destinations(label, set(STATES))
        dest_in_current = dests & current
        state_after = sorted(dest_in_current or dests)[0]
        events.append(DecodedEvent(seg, label, cid, margin, state_after))
        if margin is not None and margin < margin_tau:
            new_states = set()
            for c in cand:
                new_states.update(diagram.origins(c, set(STATES)))
            current = new_states
        else:
            current = diagram.origins(label, set(STATES))
        prev_class = label

    events.reverse()
    return DecodedTimeline(events=events, direction="backward")


# ---------------------------------------------------------------------------
# reconciliation + CSV
# ---------------------------------------------------------------------------

@dataclass
class ReconcileRow:
    onset: float
    offset: float
    fwd_label: str | None
    bwd_label: str | None
    agree: bool
    fwd_margin: float | None
    bwd_margin: float | None


@dataclass
class ReconcileReport:
    rows: list[ReconcileRow]

    @property
    def agreement_rate(self) -> float:
        if not self.rows:
            return 1.0
        return sum(r.agree for r in self.rows) / len(self.rows)


def reconcile(fwd: DecodedTimeline, bwd: DecodedTimeline) -> ReconcileReport:
    """Per-segment comparison of the two decoding directions; both opinions
    are reported, nothing is overridden."""
    if len(fwd.events) != len(bwd.events):
        raise ValueError("timelines decode different segment lists")
    rows = []
    for fe, be in zip(fwd.events, bwd.events):
        rows.append(ReconcileRow(
            onset=fe.segment.onset, offset=fe.segment.offset,
            fwd_label=fe.label, bwd_label=be.label,
            agree=fe.label == be.label,
            fwd_margin=fe.margin, bwd_margin=be.margin,
        ))
    return ReconcileReport(rows=rows)


def _fmt(x, spec=".6f"):
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:{spec}}"
    return str(x)


def write_decoded_csv(fwd: DecodedTimeline | None, bwd: DecodedTimeline | None, path) -> None:
    ref = fwd or bwd
    with open(path, "w", encoding="ascii") as fh:
        fh.write("onset_s,offset_s,fwd_label,bwd_label,state_after,margin\n")
        for i, ev in enumerate(ref.events):
            fe = fwd.events[i] if fwd else None
            be = bwd.events[i] if bwd else None
            margin = fe.margin if fe and fe.margin is not None else (be.margin if be else None)
            fh.write(f"{ev.segment.onset:.6f},{ev.segment.offset:.6f},"
                     f"{_fmt(fe.label if fe else None, 's')},{_fmt(be.label if be else None, 's')},"
                     f"{ev.state_after},{_fmt(margin, '.4f')}\n")


def write_reconcile_csv(report: ReconcileReport, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("onset_s,offset_s,fwd_label,bwd_label,agree,fwd_margin,bwd_margin\n")
        for r in report.rows:
            fh.write(f"{r.onset:.6f},{r.offset:.6f},{_fmt(r.fwd_label, 's')},"
                     f"{_fmt(r.bwd_label, 's')},{int(r.agree)},"
                     f"{_fmt(r.fwd_margin, '.4f')},{_fmt(r.bwd_margin, '.4f')}\n")


def _parse_opt(tok, conv=float):
    return None if tok == "-" else conv(tok)


def read_decoded_csv(path) -> list[tuple]:
    """Rows as (onset, offset, fwd_label, bwd_label, state_after, margin)."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "onset_s,offset_s,fwd_label,bwd_label,state_after,margin":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            onset, offset, fl, bl, state, margin = line.strip().split(",")
            rows.append((float(onset), float(offset), _parse_opt(fl, str),
                         _parse_opt(bl, str), state, _parse_opt(margin)))
    return rows


def read_reconcile_csv(path) -> ReconcileReport:
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "onset_s,offset_s,fwd_label,bwd_label,agree,fwd_margin,bwd_margin":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            onset, offset, fl, bl, agree, fm, bm = line.strip().split(",")
            rows.append(ReconcileRow(float(onset), float(offset), _parse_opt(fl, str),
                                     _parse_opt(bl, str), bool(int(agree)),
                                     _parse_opt(fm), _parse_opt(bm)))
    return ReconcileReport(rows=rows)
