"""Event records, selection cuts, and flattening to fixed-width feature vectors.

An event carries a variable number of jets, its leptons, and missing
transverse energy. Flattening produces the 67-wide layout used everywhere
downstream: 7 jet blocks of 8 values, one lepton block of 7, one MET block
of 4. Missing jets are zero-padded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SelectionError
from .kinematics import FourMomentum

N_JET_SLOTS = 7
JET_FIELDS = ("pt", "eta", "phi", "e", "btag", "px", "py", "pz")
LEPTON_FIELDS = ("pt", "eta", "phi", "e", "px", "py", "pz")
MET_FIELDS = ("phi", "pt", "px", "py")
N_FEATURES = N_JET_SLOTS * len(JET_FIELDS) + len(LEPTON_FIELDS) + len(MET_FIELDS)


def feature_names() -> tuple[str, ...]:
    """Canonical names for the 67 flattened features, in layout order."""
    names = []
    for j in range(1, N_JET_SLOTS + 1):
        names.extend(f"jet{j}_{f}" for f in JET_FIELDS)
    names.extend(f"lep_{f}" for f in LEPTON_FIELDS)
    names.extend(f"met_{f}" for f in MET_FIELDS)
    return tuple(names)


FEATURE_NAMES = feature_names()
assert len(FEATURE_NAMES) == N_FEATURES == 67


@dataclass(frozen=True)
class Jet:
    momentum: FourMomentum
    btag: int = 0


@dataclass(frozen=True)
class Lepton:
    momentum: FourMomentum
    flavour: str  # "electron" or "muon"
    isolated: bool = True


@dataclass(frozen=True)
class Met:
    pt: float
    phi: float

    @property
    def px(self) -> float:
        return self.pt * math.cos(self.phi)

    @property
    def py(self) -> float:
        return self.pt * math.sin(self.phi)


@dataclass
class EventRecord:
    jets: list[Jet] = field(default_factory=list)
    leptons: list[Lepton] = field(default_factory=list)
    met: Met = Met(0.0, 0.0)
    label: int = 0


@dataclass(frozen=True)
class SelectionConfig:
    """Object-level cuts; all comparisons are strict inequalities."""

    electron_pt_min: float = 30.0
    electron_abs_eta_max: float = 2.1
    muon_pt_min: float = 26.0
    muon_abs_eta_max: float = 2.1
    jet_pt_min: float = 30.0
    jet_abs_eta_max: float = 2.4
    min_jets: int = 4
    min_btags: int = 2


def _jet_passes(jet: Jet, cuts: SelectionConfig) -> bool:
    mom = jet.momentum
    return mom.pt > cuts.jet_pt_min and abs(mom.eta) < cuts.jet_abs_eta_max


def _lepton_passes(lepton: Lepton, cuts: SelectionConfig) -> bool:
    # isolation arrives as a precomputed flag on the record
    if not lepton.isolated:
        return False
    mom = lepton.momentum
    if lepton.flavour == "electron":
        return mom.pt > cuts.electron_pt_min and abs(mom.eta) < cuts.electron_abs_eta_max
    if lepton.flavour == "muon":
        return mom.pt > cuts.muon_pt_min and abs(mom.eta) < cuts.muon_abs_eta_max
    raise SelectionError(f"unknown lepton flavour {lepton.flavour!r}")


def apply_selection(event: EventRecord, cuts: SelectionConfig = SelectionConfig()) -> bool:
    """True iff the event passes all object and count cuts.

    Requires at least ``min_jets`` surviving jets, at least ``min_btags``
    b-tags among them, and exactly one lepton passing its flavour cuts.
    """
    good_jets = [j for j in event.jets if _jet_passes(j, cuts)]
    if len(good_jets) < cuts.min_jets:
        return False
    if sum(j.btag for j in good_jets) < cuts.min_btags:
        return False
    n_leptons = sum(1 for lep in event.leptons if _lepton_passes(lep, cuts))
    return n_leptons == 1


def flatten_event(event: EventRecord) -> np.ndarray:
    """Flatten an event to the canonical 67-wide vector.

    Jets are ordered by descending transverse momentum; only the leading
    seven are kept and missing slots are zero-filled. The event must carry
    at least four jets and exactly one lepton.
    """
    if len(event.jets) < 4:
        raise SelectionError(f"need at least 4 jets to flatten, got {len(event.jets)}")
    if len(event.leptons) != 1:
        raise SelectionError(f"need exactly 1 lepton to flatten, got {len(event.leptons)}")

    out = np.zeros(N_FEATURES, dtype=np.float64)
    ordered = sorted(event.jets, key=lambda j: -j.momentum.pt)
    for slot, jet in enumerate(ordered[:N_JET_SLOTS]):
        mom = jet.momentum
        base = slot * len(JET_FIELDS)
        out[base : base + 8] = (
            mom.pt, mom.eta, mom.phi, mom.energy, float(jet.btag), mom.px, mom.py, mom.pz,
        )

    base = N_JET_SLOTS * len(JET_FIELDS)
    lep = event.leptons[0].momentum
    out[base : base + 7] = (lep.pt, lep.eta, lep.phi, lep.energy, lep.px, lep.py, lep.pz)

    met = event.met
    out[base + 7 : base + 11] = (met.phi, met.pt, met.px, met.py)
    return out
