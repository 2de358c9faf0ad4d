//! Immutable rebalancing instances.
//!
//! A [`NetworkInstance`] is a unit-square service area with one depot
//! (always node 0) and a set of supplier, demander and charger nodes. Travel
//! times are Euclidean distances at constant speed, expressed in minutes and
//! snapped to a dyadic grid (see [`quantize_minutes`]) so that every clock
//! value the simulator produces is an exact binary fraction.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::InstanceError;

/// Default shuttle/EV speed, miles per hour.
pub const DEFAULT_SPEED_MPH: f64 = 45.0;
/// EVs charged strictly above this level skip the charger.
pub const DEFAULT_CHARGE_THRESHOLD: u8 = 3;
/// Level every charged EV is brought up to.
pub const DEFAULT_CHARGE_TARGET: u8 = 5;

/// Resolution of the time grid: travel times are multiples of 2^-32 minutes.
const TIME_GRID: f64 = 4_294_967_296.0;

/// Snaps a duration in minutes to the simulator's time grid.
///
/// All sums of grid values stay exact in `f64` for horizons below 2^20
/// minutes, which keeps clock arithmetic associative.
pub fn quantize_minutes(minutes: f64) -> f64 {
    (minutes * TIME_GRID).round() / TIME_GRID
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Depot,
    Supplier,
    Demander,
    Charger,
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeRole::Depot => "depot",
            NodeRole::Supplier => "supplier",
            NodeRole::Demander => "demander",
            NodeRole::Charger => "charger",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub role: NodeRole,
    /// Initial EV charge level; 0 means the node holds no EV.
    #[serde(rename = "charge")]
    pub initial_charge: u8,
}

/// Charger-scarcity regime of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    /// Role counts for a network of `n_nodes` nodes (depot included).
    ///
    /// Sizes 23, 50 and 100 use the published table verbatim. Other sizes
    /// scale the 23-node row by `n_nodes / 23` and then restore the regime's
    /// defining relation between chargers, demanders and EVs needing charge.
    pub fn counts(self, n_nodes: usize) -> Result<RoleCounts, InstanceError> {
        use Difficulty::*;
        let table = |de, ch, su, low| RoleCounts {
            demanders: de,
            chargers: ch,
            suppliers: su,
            needs_charge: low,
        };
        let exact = match (n_nodes, self) {
            (23, Easy) => Some(table(7, 7, 8, 4)),
            (23, Medium) => Some(table(7, 7, 8, 8)),
            (23, Hard) => Some(table(8, 6, 8, 8)),
            (50, Easy) => Some(table(16, 16, 17, 8)),
            (50, Medium) => Some(table(16, 16, 17, 17)),
            (50, Hard) => Some(table(17, 15, 17, 17)),
            (100, Easy) => Some(table(33, 33, 33, 16)),
            (100, Medium) => Some(table(33, 33, 33, 33)),
            (100, Hard) => Some(table(33, 32, 34, 34)),
            _ => None,
        };
        if let Some(c) = exact {
            return Ok(c);
        }
        self.scaled_counts(n_nodes)
    }

    fn scaled_counts(self, n_nodes: usize) -> Result<RoleCounts, InstanceError> {
        let invalid = || InstanceError::Config(format!("no {self} layout for {n_nodes} nodes"));
        if n_nodes < 4 {
            return Err(invalid());
        }
        let free = n_nodes - 1;
        let base = Difficulty::counts(self, 23)?;
        let scale = n_nodes as f64 / 23.0;
        let scaled = |v: usize| ((v as f64 * scale).floor() as usize).max(1);

        let mut demanders = scaled(base.demanders);
        let layout = |demanders: usize| -> Option<(usize, usize)> {
            let chargers = match self {
                Difficulty::Easy => scaled(base.chargers),
                Difficulty::Medium => demanders,
                Difficulty::Hard => scaled(base.chargers).min(demanders.checked_sub(1)?),
            };
            if chargers == 0 || demanders + chargers >= free {
                return None;
            }
            let suppliers = free - demanders - chargers;
            (suppliers >= demanders).then_some((chargers, suppliers))
        };
        let (chargers, suppliers) = loop {
            if let Some(found) = layout(demanders) {
                break found;
            }
            if demanders <= 1 {
                return Err(invalid());
            }
            demanders -= 1;
        };
        let needs_charge = match self {
            Difficulty::Easy => {
                let low = (base.needs_charge as f64 * scale).round() as usize;
                low.min(chargers.saturating_sub(1)).min(suppliers)
            }
            Difficulty::Medium | Difficulty::Hard => suppliers,
        };
        Ok(RoleCounts {
            demanders,
            chargers,
            suppliers,
            needs_charge,
        })
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Difficulty {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "easy" | "e" => Ok(Difficulty::Easy),
            "medium" | "med" | "m" => Ok(Difficulty::Medium),
            "hard" | "h" => Ok(Difficulty::Hard),
            other => Err(InstanceError::Config(format!(
                "unknown difficulty '{other}'"
            ))),
        }
    }
}

/// Number of nodes per role, plus how many suppliers hold an EV that must be
/// charged before delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoleCounts {
    pub demanders: usize,
    pub chargers: usize,
    pub suppliers: usize,
    pub needs_charge: usize,
}

impl RoleCounts {
    pub fn non_depot(&self) -> usize {
        self.demanders + self.chargers + self.suppliers
    }
}

/// Row-major square matrix of travel minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimes {
    n: usize,
    minutes: Vec<f64>,
}

impl TravelTimes {
    fn euclidean(nodes: &[Node], speed_mph: f64) -> Self {
        let n = nodes.len();
        let mut minutes = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (nodes[i].x - nodes[j].x).hypot(nodes[i].y - nodes[j].y);
                let t = quantize_minutes(d / speed_mph * 60.0);
                minutes[i * n + j] = t;
                minutes[j * n + i] = t;
            }
        }
        TravelTimes { n, minutes }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.minutes[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.minutes[i * self.n..(i + 1) * self.n]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Mean over all ordered pairs `i != j`.
    pub fn off_diagonal_mean(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let total: f64 = self.minutes.iter().sum();
        total / (self.n * (self.n - 1)) as f64
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    nodes: Vec<Node>,
    travel: TravelTimes,
    speed_mph: f64,
    charge_threshold: u8,
    charge_target: u8,
    per_level_charge_time: f64,
    num_shuttles: usize,
    drivers_per_shuttle: usize,
    seed: Option<u64>,
}

/// Fleet and charging parameters shared by every node of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetConfig {
    pub num_shuttles: usize,
    pub drivers_per_shuttle: usize,
    pub speed_mph: f64,
    pub charge_threshold: u8,
    pub charge_target: u8,
}

impl FleetConfig {
    pub fn new(num_shuttles: usize, drivers_per_shuttle: usize) -> Self {
        FleetConfig {
            num_shuttles,
            drivers_per_shuttle,
            speed_mph: DEFAULT_SPEED_MPH,
            charge_threshold: DEFAULT_CHARGE_THRESHOLD,
            charge_target: DEFAULT_CHARGE_TARGET,
        }
    }
}

impl NetworkInstance {
    /// Builds and validates an instance from explicit nodes.
    pub fn new(
        nodes: Vec<Node>,
        fleet: FleetConfig,
        seed: Option<u64>,
    ) -> Result<Self, InstanceError> {
        if !(fleet.speed_mph.is_finite() && fleet.speed_mph > 0.0) {
            return Err(InstanceError::Invalid("speed_mph must be positive".into()));
        }
        let travel = TravelTimes::euclidean(&nodes, fleet.speed_mph);
        let per_level_charge_time = quantize_minutes(travel.off_diagonal_mean());
        let inst = NetworkInstance {
            nodes,
            travel,
            speed_mph: fleet.speed_mph,
            charge_threshold: fleet.charge_threshold,
            charge_target: fleet.charge_target,
            per_level_charge_time,
            num_shuttles: fleet.num_shuttles,
            drivers_per_shuttle: fleet.drivers_per_shuttle,
            seed,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let bad = |msg: String| Err(InstanceError::Invalid(msg));
        if self.nodes.is_empty() {
            return bad("instance has no nodes".into());
        }
        if self.nodes[0].role != NodeRole::Depot {
            return bad("node 0 must be the depot".into());
        }
        if self.num_shuttles == 0 || self.drivers_per_shuttle == 0 {
            return bad("num_shuttles and drivers_per_shuttle must be positive".into());
        }
        if self.charge_threshold >= self.charge_target {
            return bad("charge_threshold must be below charge_target".into());
        }
        let mut depots = 0;
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.id != idx {
                return bad(format!("node at position {idx} has id {}", node.id));
            }
            let in_square = |v: f64| (0.0..=1.0).contains(&v);
            if !in_square(node.x) || !in_square(node.y) {
                return bad(format!("node {idx} lies outside the unit square"));
            }
            let has_ev = node.initial_charge > 0;
            match node.role {
                NodeRole::Depot => depots += 1,
                NodeRole::Supplier => {
                    if !has_ev || node.initial_charge > self.charge_target {
                        return bad(format!(
                            "supplier {idx} must hold an EV charged 1..={}",
                            self.charge_target
                        ));
                    }
                }
                _ if has_ev => return bad(format!("{} node {idx} cannot hold an EV", node.role)),
                _ => {}
            }
        }
        if depots != 1 {
            return bad(format!("expected exactly one depot, found {depots}"));
        }
        if self.count(NodeRole::Demander) > self.count(NodeRole::Supplier) {
            return bad("more demanders than suppliers".into());
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn role(&self, i: usize) -> NodeRole {
        self.nodes[i].role
    }

    pub fn count(&self, role: NodeRole) -> usize {
        self.nodes.iter().filter(|n| n.role == role).count()
    }

    /// Indices of all nodes with `role`, ascending.
    pub fn indices(&self, role: NodeRole) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.role == role)
            .map(|n| n.id)
            .collect()
    }

    /// Suppliers whose EV needs a charger before delivery.
    pub fn needs_charge_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.role == NodeRole::Supplier && n.initial_charge <= self.charge_threshold)
            .count()
    }

    pub fn travel(&self) -> &TravelTimes {
        &self.travel
    }

    #[inline]
    pub fn travel_minutes(&self, i: usize, j: usize) -> f64 {
        self.travel.get(i, j)
    }

    pub fn speed_mph(&self) -> f64 {
        self.speed_mph
    }

    pub fn charge_threshold(&self) -> u8 {
        self.charge_threshold
    }

    pub fn charge_target(&self) -> u8 {
        self.charge_target
    }

    pub fn per_level_charge_time(&self) -> f64 {
        self.per_level_charge_time
    }

    /// Minutes needed to bring an EV at `level` up to the charge target.
    pub fn charging_minutes(&self, level: u8) -> f64 {
        f64::from(self.charge_target.saturating_sub(level)) * self.per_level_charge_time
    }

    pub fn num_shuttles(&self) -> usize {
        self.num_shuttles
    }

    pub fn drivers_per_shuttle(&self) -> usize {
        self.drivers_per_shuttle
    }

    pub fn total_drivers(&self) -> usize {
        self.num_shuttles * self.drivers_per_shuttle
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn fleet(&self) -> FleetConfig {
        FleetConfig {
            num_shuttles: self.num_shuttles,
            drivers_per_shuttle: self.drivers_per_shuttle,
            speed_mph: self.speed_mph,
            charge_threshold: self.charge_threshold,
            charge_target: self.charge_target,
        }
    }

    /// Same geometry and roles with a different fleet.
    pub fn with_fleet(
        &self,
        num_shuttles: usize,
        drivers_per_shuttle: usize,
    ) -> Result<Self, InstanceError> {
        let mut fleet = self.fleet();
        fleet.num_shuttles = num_shuttles;
        fleet.drivers_per_shuttle = drivers_per_shuttle;
        NetworkInstance::new(self.nodes.clone(), fleet, self.seed)
    }

    /// Applies a permutation to the non-depot nodes: old node `i` becomes
    /// node `perm[i]`. `perm[0]` must be 0.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self, InstanceError> {
        if perm.len() != self.len() || perm.first() != Some(&0) {
            return Err(InstanceError::Invalid(
                "permutation must fix the depot".into(),
            ));
        }
        let mut nodes = self.nodes.clone();
        for (old, &new) in perm.iter().enumerate() {
            let mut node = self.nodes[old];
            node.id = new;
            nodes[new] = node;
        }
        NetworkInstance::new(nodes, self.fleet(), self.seed)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile::from(self);
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }
}

/// Writes `instance` as a single JSON document.
pub fn save_instance(
    instance: &NetworkInstance,
    path: impl AsRef<Path>,
) -> Result<(), InstanceError> {
    std::fs::write(path, instance.to_json())?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<NetworkInstance, InstanceError> {
    let text = std::fs::read_to_string(path)?;
    NetworkInstance::from_json(&text)
}

/// On-disk layout of an instance.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    nodes: Vec<Node>,
    speed_mph: f64,
    charge_threshold: u8,
    charge_target: u8,
    num_shuttles: usize,
    drivers_per_shuttle: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    travel_time: Option<Vec<Vec<f64>>>,
}

impl From<&NetworkInstance> for InstanceFile {
    fn from(inst: &NetworkInstance) -> Self {
        InstanceFile {
            nodes: inst.nodes.clone(),
            speed_mph: inst.speed_mph,
            charge_threshold: inst.charge_threshold,
            charge_target: inst.charge_target,
            num_shuttles: inst.num_shuttles,
            drivers_per_shuttle: inst.drivers_per_shuttle,
            seed: inst.seed,
            travel_time: Some(inst.travel.to_rows()),
        }
    }
}

impl InstanceFile {
    fn into_instance(self) -> Result<NetworkInstance, InstanceError> {
        let embedded = self
            .travel_time
            .ok_or(InstanceError::MissingField("travel_time"))?;
        let n = self.nodes.len();
        if embedded.len() != n || embedded.iter().any(|row| row.len() != n) {
            return Err(InstanceError::Invalid(format!(
                "travel_time must be {n}x{n}"
            )));
        }
        for i in 0..n {
            if embedded[i][i] != 0.0 {
                return Err(InstanceError::Invalid(format!(
                    "travel_time[{i}][{i}] is not zero"
                )));
            }
            for j in (i + 1)..n {
                if embedded[i][j] != embedded[j][i] {
                    return Err(InstanceError::Invalid(format!(
                        "travel_time is asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        let fleet = FleetConfig {
            num_shuttles: self.num_shuttles,
            drivers_per_shuttle: self.drivers_per_shuttle,
            speed_mph: self.speed_mph,
            charge_threshold: self.charge_threshold,
            charge_target: self.charge_target,
        };
        let inst = NetworkInstance::new(self.nodes, fleet, self.seed)?;
        for (i, row) in embedded.iter().enumerate() {
            for (j, &t) in row.iter().enumerate() {
                if (t - inst.travel_minutes(i, j)).abs() > 1e-9 {
                    return Err(InstanceError::Invalid(format!(
                        "travel_time[{i}][{j}] = {t} disagrees with node coordinates"
                    )));
                }
            }
        }
        Ok(inst)
    }
}

/// Samples a random instance: coordinates uniform in the unit square, roles
/// assigned by a uniform shuffle, supplier charges uniform within their
/// charging class.
pub fn generate_instance(
    seed: u64,
    n_nodes: usize,
    difficulty: Difficulty,
    num_shuttles: usize,
    drivers_per_shuttle: usize,
) -> Result<NetworkInstance, InstanceError> {
    let counts = difficulty.counts(n_nodes)?;
    generate_with_counts(
        seed,
        counts,
        FleetConfig::new(num_shuttles, drivers_per_shuttle),
    )
}

/// Like [`generate_instance`] but with explicit role counts.
pub fn generate_with_counts(
    seed: u64,
    counts: RoleCounts,
    fleet: FleetConfig,
) -> Result<NetworkInstance, InstanceError> {
    if counts.needs_charge > counts.suppliers {
        return Err(InstanceError::Config(
            "more EVs needing charge than suppliers".into(),
        ));
    }
    if counts.demanders > counts.suppliers {
        return Err(InstanceError::Config(
            "more demanders than suppliers".into(),
        ));
    }
    if counts.needs_charge > 0 && counts.chargers == 0 {
        return Err(InstanceError::Config(
            "EVs need charging but there are no chargers".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = counts.non_depot() + 1;
    let mut roles = Vec::with_capacity(total - 1);
    roles.extend(std::iter::repeat_n(NodeRole::Demander, counts.demanders));
    roles.extend(std::iter::repeat_n(NodeRole::Charger, counts.chargers));
    roles.extend(std::iter::repeat_n(NodeRole::Supplier, counts.suppliers));
    roles.shuffle(&mut rng);

    let mut nodes = Vec::with_capacity(total);
    nodes.push(Node {
        id: 0,
        x: rng.gen::<f64>(),
        y: rng.gen::<f64>(),
        role: NodeRole::Depot,
        initial_charge: 0,
    });
    for (k, role) in roles.into_iter().enumerate() {
        nodes.push(Node {
            id: k + 1,
            x: rng.gen::<f64>(),
            y: rng.gen::<f64>(),
            role,
            initial_charge: 0,
        });
    }

    let mut suppliers: Vec<usize> = nodes
        .iter()
        .filter(|n| n.role == NodeRole::Supplier)
        .map(|n| n.id)
        .collect();
    suppliers.shuffle(&mut rng);
    for (k, &s) in suppliers.iter().enumerate() {
        nodes[s].initial_charge = if k < counts.needs_charge {
            rng.gen_range(1..=fleet.charge_threshold)
        } else {
            rng.gen_range(fleet.charge_threshold + 1..=fleet.charge_target)
        };
    }
    NetworkInstance::new(nodes, fleet, Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line_instance(xs: &[(f64, f64, NodeRole, u8)]) -> NetworkInstance {
        let nodes = xs
            .iter()
            .enumerate()
            .map(|(id, &(x, y, role, initial_charge))| Node {
                id,
                x,
                y,
                role,
                initial_charge,
            })
            .collect();
        NetworkInstance::new(nodes, FleetConfig::new(1, 1), None).unwrap()
    }

    #[test]
    fn table_rows_are_exact() {
        let inst = generate_instance(7, 23, Difficulty::Easy, 1, 3).unwrap();
        assert_eq!(inst.count(NodeRole::Demander), 7);
        assert_eq!(inst.count(NodeRole::Charger), 7);
        assert_eq!(inst.count(NodeRole::Supplier), 8);
        assert_eq!(inst.needs_charge_count(), 4);

        let inst = generate_instance(7, 50, Difficulty::Medium, 2, 3).unwrap();
        assert_eq!(
            (
                inst.count(NodeRole::Demander),
                inst.count(NodeRole::Charger)
            ),
            (16, 16)
        );
        assert_eq!(
            (inst.count(NodeRole::Supplier), inst.needs_charge_count()),
            (17, 17)
        );

        let inst = generate_instance(7, 100, Difficulty::Hard, 3, 2).unwrap();
        assert_eq!(
            (
                inst.count(NodeRole::Demander),
                inst.count(NodeRole::Charger)
            ),
            (33, 32)
        );
        assert_eq!(
            (inst.count(NodeRole::Supplier), inst.needs_charge_count()),
            (34, 34)
        );
        assert_eq!(inst.num_shuttles(), 3);
        assert_eq!(inst.drivers_per_shuttle(), 2);
    }

    #[test]
    fn travel_time_examples() {
        let inst = line_instance(&[
            (0.0, 0.0, NodeRole::Depot, 0),
            (0.75, 0.0, NodeRole::Supplier, 5),
            (0.3, 0.4, NodeRole::Demander, 0),
        ]);
        assert_eq!(inst.travel_minutes(0, 1), 1.0);
        assert_eq!(inst.travel_minutes(1, 1), 0.0);
        assert_relative_eq!(inst.travel_minutes(0, 2), 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn scaled_sizes_keep_regime_relations() {
        for n in [7, 10, 12, 30, 75, 200] {
            for d in Difficulty::ALL {
                let c = d.counts(n).unwrap();
                assert_eq!(c.non_depot(), n - 1, "n={n} {d}");
                assert!(c.demanders <= c.suppliers);
                match d {
                    Difficulty::Easy => assert!(c.needs_charge < c.chargers),
                    Difficulty::Medium => assert_eq!(c.chargers, c.demanders),
                    Difficulty::Hard => assert!(c.chargers < c.demanders),
                }
            }
        }
        assert!(Difficulty::Hard.counts(3).is_err());
    }

    #[test]
    fn missing_travel_time_is_reported() {
        let inst = generate_instance(1, 23, Difficulty::Easy, 1, 3).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&inst.to_json()).unwrap();
        value.as_object_mut().unwrap().remove("travel_time");
        let err = NetworkInstance::from_json(&value.to_string()).unwrap_err();
        assert_eq!(err.to_string(), "travel_time absent");
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let inst = generate_instance(1, 23, Difficulty::Easy, 1, 3).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&inst.to_json()).unwrap();
        value["travel_time"][1][2] = serde_json::json!(123.0);
        let err = NetworkInstance::from_json(&value.to_string()).unwrap_err();
        assert!(matches!(err, InstanceError::Invalid(_)));
        assert!(err.to_string().contains("asymmetric"), "{err}");
    }

    #[test]
    fn role_invariants_are_validated() {
        let nodes = vec![
            Node {
                id: 0,
                x: 0.1,
                y: 0.1,
                role: NodeRole::Depot,
                initial_charge: 0,
            },
            Node {
                id: 1,
                x: 0.5,
                y: 0.1,
                role: NodeRole::Demander,
                initial_charge: 2,
            },
        ];
        assert!(NetworkInstance::new(nodes, FleetConfig::new(1, 1), None).is_err());
        let nodes = vec![
            Node {
                id: 0,
                x: 0.1,
                y: 0.1,
                role: NodeRole::Supplier,
                initial_charge: 2,
            },
            Node {
                id: 1,
                x: 0.5,
                y: 0.1,
                role: NodeRole::Depot,
                initial_charge: 0,
            },
        ];
        assert!(NetworkInstance::new(nodes, FleetConfig::new(1, 1), None).is_err());
        let nodes = vec![Node {
            id: 0,
            x: 0.1,
            y: 1.5,
            role: NodeRole::Depot,
            initial_charge: 0,
        }];
        assert!(NetworkInstance::new(nodes, FleetConfig::new(1, 1), None).is_err());
    }

    #[test]
    fn unknown_difficulty_is_a_config_error() {
        assert!(matches!(
            "brutal".parse::<Difficulty>(),
            Err(InstanceError::Config(_))
        ));
        assert_eq!("Medium".parse::<Difficulty>().unwrap(), Difficulty::Medium);
    }

    #[test]
    fn relabeling_moves_nodes() {
        let inst = generate_instance(3, 8, Difficulty::Easy, 1, 2).unwrap();
        let perm: Vec<usize> = std::iter::once(0).chain((1..8).rev()).collect();
        let r = inst.relabeled(&perm).unwrap();
        assert_eq!(r.node(7).x, inst.node(1).x);
        assert_eq!(r.travel_minutes(7, 6), inst.travel_minutes(1, 2));
    }
}
