//! Feeder data model, topology helpers and validation.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float as _;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Standard single-phase pole/pad transformer sizes (kVA).
pub const SINGLE_PHASE_LADDER_KVA: [f64; 8] = [10.0, 15.0, 25.0, 37.5, 50.0, 75.0, 100.0, 167.0];
/// Standard three-phase transformer sizes (kVA).
pub const THREE_PHASE_LADDER_KVA: [f64; 9] = [
    75.0, 150.0, 225.0, 300.0, 500.0, 750.0, 1000.0, 1500.0, 2500.0,
];

/// Size ladder a transformer with `phase_count` phases is drawn from.
///
/// Two-phase (open-wye) banks are built from single-phase units and use the
/// single-phase ladder.
pub fn transformer_ladder(phase_count: u8) -> &'static [f64] {
    if phase_count >= 3 {
        &THREE_PHASE_LADDER_KVA
    } else {
        &SINGLE_PHASE_LADDER_KVA
    }
}

/// A single conductor phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Phase::A => 'A',
            Phase::B => 'B',
            Phase::C => 'C',
        }
    }
}

/// Subset of {A, B, C}. Serialized as the phase letters in order, e.g. `"AC"`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const EMPTY: PhaseSet = PhaseSet(0);
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn single(phase: Phase) -> Self {
        PhaseSet(1 << phase.index())
    }

    pub fn contains(self, phase: Phase) -> bool {
        self.0 & (1 << phase.index()) != 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn insert(&mut self, phase: Phase) {
        self.0 |= 1 << phase.index();
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut set = PhaseSet::EMPTY;
        for ch in text.chars() {
            let phase = match ch.to_ascii_uppercase() {
                'A' => Phase::A,
                'B' => Phase::B,
                'C' => Phase::C,
                _ => return None,
            };
            if set.contains(phase) {
                return None;
            }
            set.insert(phase);
        }
        Some(set)
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseSet({self})")
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PhaseVisitor;
        impl Visitor<'_> for PhaseVisitor {
            type Value = PhaseSet;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a string of distinct phase letters drawn from \"ABC\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<PhaseSet, E> {
                PhaseSet::parse(v).ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }
        deserializer.deserialize_str(PhaseVisitor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomerClass {
    Residential,
    Commercial,
    Industrial,
    Mixed,
}

impl CustomerClass {
    pub const ALL: [CustomerClass; 4] = [
        CustomerClass::Residential,
        CustomerClass::Commercial,
        CustomerClass::Industrial,
        CustomerClass::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CustomerClass::Residential => "residential",
            CustomerClass::Commercial => "commercial",
            CustomerClass::Industrial => "industrial",
            CustomerClass::Mixed => "mixed",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Line-to-neutral kV.
    pub nominal_voltage_kv: f64,
    #[serde(default)]
    pub is_source: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub phases: PhaseSet,
    pub resistance_ohm_per_mi: f64,
    pub reactance_ohm_per_mi: f64,
    pub length_mi: f64,
    pub ampacity_a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub id: String,
    /// Primary side.
    pub from_bus: String,
    /// Secondary side.
    pub to_bus: String,
    pub phase_count: u8,
    pub rating_kva: f64,
    pub impedance_pct: f64,
    /// Line-to-neutral kV of the secondary winding.
    pub secondary_voltage_kv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub id: String,
    pub bus: String,
    pub customer_class: CustomerClass,
    pub peak_kw: f64,
    pub power_factor: f64,
    pub profile_id: String,
}

impl LoadPoint {
    /// Reactive power drawn alongside `kw` at this load's (lagging) power factor.
    pub fn kvar_for(&self, kw: f64) -> f64 {
        let pf = self.power_factor;
        if pf >= 1.0 {
            0.0
        } else {
            kw * (1.0 - pf * pf).sqrt() / pf
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Feeder {
    pub id: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<LineSegment>,
    pub transformers: Vec<Transformer>,
    pub loads: Vec<LoadPoint>,
}

/// A branch of the feeder graph: either a line segment or a transformer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BranchRef {
    Line(usize),
    Transformer(usize),
}

impl Feeder {
    pub fn source(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.is_source)
    }

    pub fn bus_index(&self) -> BTreeMap<&str, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect()
    }

    pub fn branch_count(&self) -> usize {
        self.lines.len() + self.transformers.len()
    }

    pub fn branch_id(&self, branch: BranchRef) -> &str {
        match branch {
            BranchRef::Line(i) => &self.lines[i].id,
            BranchRef::Transformer(i) => &self.transformers[i].id,
        }
    }

    /// Transformer index serving each bus (the nearest transformer upstream),
    /// or `None` for buses fed directly from the primary.
    pub fn serving_transformers(&self) -> Result<Vec<Option<usize>>, TopologyError> {
        let topo = Topology::build(self)?;
        let mut serving = vec![None; self.buses.len()];
        for &bus in &topo.order {
            if let Some((branch, parent)) = topo.parent[bus] {
                serving[bus] = match branch {
                    BranchRef::Transformer(t) => Some(t),
                    BranchRef::Line(_) => serving[parent],
                };
            }
        }
        Ok(serving)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("feeder has no source bus")]
    NoSource,
    #[error("feeder is not a connected radial tree")]
    NotRadial,
    #[error("branch `{0}` references unknown bus `{1}`")]
    UnknownBus(String, String),
}

/// Radial tree view of a feeder, rooted at its source bus.
#[derive(Clone, Debug)]
pub struct Topology {
    pub source: usize,
    /// Buses in breadth-first order from the source.
    pub order: Vec<usize>,
    /// Parent branch and parent bus for every non-source bus.
    pub parent: Vec<Option<(BranchRef, usize)>>,
    pub depth: Vec<usize>,
}

impl Topology {
    pub fn build(feeder: &Feeder) -> Result<Self, TopologyError> {
        let index = feeder.bus_index();
        let source = feeder
            .buses
            .iter()
            .position(|b| b.is_source)
            .ok_or(TopologyError::NoSource)?;
        let n = feeder.buses.len();
        if feeder.branch_count() + 1 != n {
            return Err(TopologyError::NotRadial);
        }
        let mut adjacency: Vec<Vec<(BranchRef, usize)>> = vec![Vec::new(); n];
        let lookup = |branch: &str, bus: &str| {
            index
                .get(bus)
                .copied()
                .ok_or_else(|| TopologyError::UnknownBus(branch.to_string(), bus.to_string()))
        };
        for (i, l) in feeder.lines.iter().enumerate() {
            let a = lookup(&l.id, &l.from_bus)?;
            let b = lookup(&l.id, &l.to_bus)?;
            adjacency[a].push((BranchRef::Line(i), b));
            adjacency[b].push((BranchRef::Line(i), a));
        }
        for (i, t) in feeder.transformers.iter().enumerate() {
            let a = lookup(&t.id, &t.from_bus)?;
            let b = lookup(&t.id, &t.to_bus)?;
            adjacency[a].push((BranchRef::Transformer(i), b));
            adjacency[b].push((BranchRef::Transformer(i), a));
        }
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([source]);
        seen[source] = true;
        while let Some(bus) = queue.pop_front() {
            order.push(bus);
            for &(branch, next) in &adjacency[bus] {
                if parent[bus].map(|(b, _)| b) == Some(branch) {
                    continue;
                }
                if seen[next] {
                    return Err(TopologyError::NotRadial);
                }
                seen[next] = true;
                parent[next] = Some((branch, bus));
                depth[next] = depth[bus] + 1;
                queue.push_back(next);
            }
        }
        if order.len() != n {
            return Err(TopologyError::NotRadial);
        }
        Ok(Topology {
            source,
            order,
            parent,
            depth,
        })
    }

    /// Branches on the path from the source down to `bus`, source end first.
    pub fn path_to(&self, bus: usize) -> Vec<BranchRef> {
        let mut path = Vec::new();
        let mut cur = bus;
        while let Some((branch, up)) = self.parent[cur] {
            path.push(branch);
            cur = up;
        }
        path.reverse();
        path
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    SourceCount,
    DuplicateId,
    InvalidValue,
    DanglingReference,
    PhaseMismatch,
    VoltageMismatch,
    NonRadial,
    Disconnected,
    TransformerOrientation,
}

impl IssueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::SourceCount => "source-count",
            IssueKind::DuplicateId => "duplicate-id",
            IssueKind::InvalidValue => "invalid-value",
            IssueKind::DanglingReference => "dangling reference",
            IssueKind::PhaseMismatch => "phase-mismatch",
            IssueKind::VoltageMismatch => "voltage-mismatch",
            IssueKind::NonRadial => "non-radial",
            IssueKind::Disconnected => "disconnected",
            IssueKind::TransformerOrientation => "transformer-orientation",
        }
    }
}

/// One invariant breach found by [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub component_id: String,
    pub kind: IssueKind,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}]: {}",
            self.component_id,
            self.kind.as_str(),
            self.message
        )
    }
}

fn close(a: f64, b: f64) -> bool {
    let scale = if a.abs() > b.abs() { a.abs() } else { b.abs() };
    (a - b).abs() <= 1e-6 * scale.max(1e-12)
}

/// Checks every feeder invariant and returns all breaches. An empty list means
/// the feeder is valid.
pub fn validate(feeder: &Feeder) -> Vec<Issue> {
    let mut issues = Vec::new();
    let mut push = |id: &str, kind: IssueKind, message: String| {
        issues.push(Issue {
            component_id: id.to_string(),
            kind,
            message,
        })
    };

    let sources: Vec<&Bus> = feeder.buses.iter().filter(|b| b.is_source).collect();
    if sources.len() != 1 {
        push(
            &feeder.id,
            IssueKind::SourceCount,
            format!("expected exactly one source bus, found {}", sources.len()),
        );
    }

    let mut bus_ids = BTreeSet::new();
    for b in &feeder.buses {
        if !bus_ids.insert(b.id.as_str()) {
            push(
                &b.id,
                IssueKind::DuplicateId,
                "bus id appears more than once".into(),
            );
        }
        if !(b.nominal_voltage_kv > 0.0) || !b.nominal_voltage_kv.is_finite() {
            push(
                &b.id,
                IssueKind::InvalidValue,
                format!(
                    "nominal_voltage_kv must be > 0, got {}",
                    b.nominal_voltage_kv
                ),
            );
        }
        if b.phases.is_empty() {
            push(&b.id, IssueKind::InvalidValue, "bus has no phases".into());
        }
    }
    let index = feeder.bus_index();

    let mut branch_ids = BTreeSet::new();
    let mut dangling = false;
    for l in &feeder.lines {
        if !branch_ids.insert(l.id.as_str()) {
            push(
                &l.id,
                IssueKind::DuplicateId,
                "branch id appears more than once".into(),
            );
        }
        if !(l.ampacity_a > 0.0) || !l.ampacity_a.is_finite() {
            push(
                &l.id,
                IssueKind::InvalidValue,
                format!("ampacity_a must be > 0, got {}", l.ampacity_a),
            );
        }
        if !(l.length_mi > 0.0) || !l.length_mi.is_finite() {
            push(
                &l.id,
                IssueKind::InvalidValue,
                format!("length_mi must be > 0, got {}", l.length_mi),
            );
        }
        if !(l.resistance_ohm_per_mi >= 0.0) || !(l.reactance_ohm_per_mi >= 0.0) {
            push(
                &l.id,
                IssueKind::InvalidValue,
                "line impedance must be non-negative".into(),
            );
        }
        if l.phases.is_empty() {
            push(&l.id, IssueKind::InvalidValue, "line has no phases".into());
        }
        let mut ends = Vec::new();
        for end in [&l.from_bus, &l.to_bus] {
            match index.get(end.as_str()) {
                Some(&i) => ends.push(&feeder.buses[i]),
                None => {
                    dangling = true;
                    push(
                        &l.id,
                        IssueKind::DanglingReference,
                        format!("line references missing bus `{end}`"),
                    );
                }
            }
        }
        for bus in &ends {
            if !l.phases.is_subset_of(bus.phases) {
                push(
                    &l.id,
                    IssueKind::PhaseMismatch,
                    format!(
                        "line phases {} not present on bus `{}` ({})",
                        l.phases, bus.id, bus.phases
                    ),
                );
            }
        }
        if let [a, b] = ends[..] {
            if !close(a.nominal_voltage_kv, b.nominal_voltage_kv) {
                push(
                    &l.id,
                    IssueKind::VoltageMismatch,
                    format!(
                        "line joins buses at {} kV and {} kV",
                        a.nominal_voltage_kv, b.nominal_voltage_kv
                    ),
                );
            }
        }
    }

    for t in &feeder.transformers {
        if !branch_ids.insert(t.id.as_str()) {
            push(
                &t.id,
                IssueKind::DuplicateId,
                "branch id appears more than once".into(),
            );
        }
        if !(t.rating_kva > 0.0) || !t.rating_kva.is_finite() {
            push(
                &t.id,
                IssueKind::InvalidValue,
                format!("rating_kva must be > 0, got {}", t.rating_kva),
            );
        }
        if !(t.impedance_pct > 0.0 && t.impedance_pct < 20.0) {
            push(
                &t.id,
                IssueKind::InvalidValue,
                format!("impedance_pct must lie in (0, 20), got {}", t.impedance_pct),
            );
        }
        if !(1..=3).contains(&t.phase_count) {
            push(
                &t.id,
                IssueKind::InvalidValue,
                format!("phase_count must be 1, 2 or 3, got {}", t.phase_count),
            );
        }
        let primary = index.get(t.from_bus.as_str()).map(|&i| &feeder.buses[i]);
        let secondary = index.get(t.to_bus.as_str()).map(|&i| &feeder.buses[i]);
        for (end, bus) in [(&t.from_bus, primary), (&t.to_bus, secondary)] {
            if bus.is_none() {
                dangling = true;
                push(
                    &t.id,
                    IssueKind::DanglingReference,
                    format!("transformer references missing bus `{end}`"),
                );
            }
        }
        if let Some(p) = primary {
            if !(t.secondary_voltage_kv < p.nominal_voltage_kv) || !(t.secondary_voltage_kv > 0.0) {
                push(
                    &t.id,
                    IssueKind::VoltageMismatch,
                    format!(
                        "secondary_voltage_kv {} must be positive and below primary {} kV",
                        t.secondary_voltage_kv, p.nominal_voltage_kv
                    ),
                );
            }
        }
        if let Some(s) = secondary {
            if !close(s.nominal_voltage_kv, t.secondary_voltage_kv) {
                push(
                    &t.id,
                    IssueKind::VoltageMismatch,
                    format!(
                        "secondary bus `{}` is {} kV but winding is {} kV",
                        s.id, s.nominal_voltage_kv, t.secondary_voltage_kv
                    ),
                );
            }
            if s.phases.len() != t.phase_count as usize {
                push(
                    &t.id,
                    IssueKind::PhaseMismatch,
                    format!(
                        "phase_count {} does not match secondary bus phases {}",
                        t.phase_count, s.phases
                    ),
                );
            }
            if let Some(p) = primary {
                if !s.phases.is_subset_of(p.phases) {
                    push(
                        &t.id,
                        IssueKind::PhaseMismatch,
                        format!(
                            "secondary phases {} not present on primary bus `{}`",
                            s.phases, p.id
                        ),
                    );
                }
            }
        }
    }

    let mut load_ids = BTreeSet::new();
    for ld in &feeder.loads {
        if !load_ids.insert(ld.id.as_str()) {
            push(
                &ld.id,
                IssueKind::DuplicateId,
                "load id appears more than once".into(),
            );
        }
        if !index.contains_key(ld.bus.as_str()) {
            push(
                &ld.id,
                IssueKind::DanglingReference,
                format!("load references missing bus `{}`", ld.bus),
            );
        }
        if !(ld.peak_kw >= 0.0) || !ld.peak_kw.is_finite() {
            push(
                &ld.id,
                IssueKind::InvalidValue,
                format!("peak_kw must be >= 0, got {}", ld.peak_kw),
            );
        }
        if !(ld.power_factor > 0.0 && ld.power_factor <= 1.0) {
            push(
                &ld.id,
                IssueKind::InvalidValue,
                format!("power_factor must lie in (0, 1], got {}", ld.power_factor),
            );
        }
        if ld.profile_id.is_empty() {
            push(
                &ld.id,
                IssueKind::InvalidValue,
                "profile_id is empty".into(),
            );
        }
    }

    if sources.len() == 1 && !dangling {
        match Topology::build(feeder) {
            Ok(topo) => {
                for &bus in &topo.order {
                    let Some((branch, _)) = topo.parent[bus] else {
                        continue;
                    };
                    let supplied = match branch {
                        BranchRef::Line(i) => feeder.lines[i].phases,
                        BranchRef::Transformer(i) => {
                            feeder.buses[index[feeder.transformers[i].to_bus.as_str()]].phases
                        }
                    };
                    let b = &feeder.buses[bus];
                    if !b.phases.is_subset_of(supplied) {
                        push(
                            &b.id,
                            IssueKind::PhaseMismatch,
                            format!(
                                "bus phases {} are not all supplied by branch `{}` ({supplied})",
                                b.phases,
                                feeder.branch_id(branch)
                            ),
                        );
                    }
                }
                for t in &feeder.transformers {
                    let to = index[t.to_bus.as_str()];
                    let upstream = topo.parent[to].map(|(_, p)| feeder.buses[p].id.as_str());
                    if upstream != Some(t.from_bus.as_str()) {
                        push(
                            &t.id,
                            IssueKind::TransformerOrientation,
                            "from_bus must be the source-side (primary) bus".into(),
                        );
                    }
                }
            }
            Err(_) => {
                let n = feeder.buses.len();
                let m = feeder.branch_count();
                if m + 1 != n {
                    push(
                        &feeder.id,
                        IssueKind::NonRadial,
                        format!(
                            "{m} branches for {n} buses; a radial feeder needs {}",
                            n.saturating_sub(1)
                        ),
                    );
                } else {
                    // Right edge count but a cycle somewhere implies a disconnected part.
                    push(
                        &feeder.id,
                        IssueKind::Disconnected,
                        "not every bus is reachable from the source".into(),
                    );
                }
            }
        }
    }
    issues
}
