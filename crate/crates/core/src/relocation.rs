//! Rule-based EV relocation.
//!
//! Whenever a driver is dropped at a supplier, its EV goes to the nearest
//! open demander if its charge is above the threshold, otherwise first to the
//! nearest available charger and from there to the demander nearest that
//! charger. Targets are claimed at plan time so overlapping transits never
//! share a charger slot or a demander.

use crate::error::RelocationError;
use crate::event::{DelayedEvent, EventKind};
use crate::instance::{NetworkInstance, NodeRole};

/// Sentinel travel time marking a claimed demander or a busy charger.
pub const BIG: f64 = 1e9;

/// Position of the smallest non-sentinel entry; ties go to the lowest index.
pub fn nearest_open(row: &[f64]) -> Result<usize, RelocationError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &t) in row.iter().enumerate() {
        if t >= BIG {
            continue;
        }
        match best {
            Some((_, b)) if t >= b => {}
            _ => best = Some((i, t)),
        }
    }
    best.map(|(i, _)| i).ok_or(RelocationError::NoOpenDemander)
}

/// Travel minutes from every node to every demander, with claimed demanders'
/// columns replaced by [`BIG`].
#[derive(Debug, Clone)]
pub struct DemandMatrix {
    demanders: Vec<usize>,
    times: Vec<f64>,
    claimed: Vec<bool>,
}

impl DemandMatrix {
    pub fn new(inst: &NetworkInstance) -> Self {
        let demanders = inst.indices(NodeRole::Demander);
        let mut times = Vec::with_capacity(inst.len() * demanders.len());
        for from in 0..inst.len() {
            times.extend(demanders.iter().map(|&d| inst.travel_minutes(from, d)));
        }
        let claimed = vec![false; demanders.len()];
        DemandMatrix {
            demanders,
            times,
            claimed,
        }
    }

    pub fn demanders(&self) -> &[usize] {
        &self.demanders
    }

    pub fn column_of(&self, node: usize) -> Option<usize> {
        self.demanders.binary_search(&node).ok()
    }

    /// Row for `from`, sentinel-masked.
    pub fn row(&self, from: usize) -> Vec<f64> {
        let k = self.demanders.len();
        self.times[from * k..(from + 1) * k]
            .iter()
            .zip(&self.claimed)
            .map(|(&t, &c)| if c { BIG } else { t })
            .collect()
    }

    pub fn is_claimed(&self, col: usize) -> bool {
        self.claimed[col]
    }

    pub fn claim(&mut self, col: usize) {
        self.claimed[col] = true;
    }

    pub fn unclaimed(&self) -> usize {
        self.claimed.iter().filter(|c| !**c).count()
    }

    /// Nearest unclaimed demander node from `from`.
    pub fn nearest(&self, from: usize) -> Result<usize, RelocationError> {
        nearest_open(&self.row(from)).map(|col| self.demanders[col])
    }
}

/// Binary availability vector over charger nodes.
#[derive(Debug, Clone)]
pub struct ChargerAvailability {
    chargers: Vec<usize>,
    available: Vec<bool>,
}

impl ChargerAvailability {
    pub fn new(inst: &NetworkInstance) -> Self {
        let chargers = inst.indices(NodeRole::Charger);
        let available = vec![true; chargers.len()];
        ChargerAvailability {
            chargers,
            available,
        }
    }

    pub fn chargers(&self) -> &[usize] {
        &self.chargers
    }

    pub fn available(&self) -> &[bool] {
        &self.available
    }

    pub fn column_of(&self, node: usize) -> Option<usize> {
        self.chargers.binary_search(&node).ok()
    }

    pub fn count_available(&self) -> usize {
        self.available.iter().filter(|a| **a).count()
    }

    pub fn is_available(&self, node: usize) -> bool {
        self.column_of(node).is_some_and(|c| self.available[c])
    }

    pub fn set(&mut self, node: usize, available: bool) {
        if let Some(c) = self.column_of(node) {
            self.available[c] = available;
        }
    }

    /// Closest available charger to `from`: the availability vector masks
    /// the travel-time row, then the argmin is taken.
    pub fn nearest(&self, inst: &NetworkInstance, from: usize) -> Result<usize, RelocationError> {
        let row: Vec<f64> = self
            .chargers
            .iter()
            .zip(&self.available)
            .map(|(&c, &ok)| {
                if ok {
                    inst.travel_minutes(from, c)
                } else {
                    BIG
                }
            })
            .collect();
        nearest_open(&row)
            .map(|col| self.chargers[col])
            .map_err(|_| RelocationError::NoChargerAvailable)
    }
}

/// Where one EV goes and the events that carry it there.
#[derive(Debug, Clone, PartialEq)]
pub struct RelocationPlan {
    pub supplier: usize,
    pub ev_charge: u8,
    pub charger: Option<usize>,
    pub demander: usize,
    pub events: Vec<DelayedEvent>,
}

impl RelocationPlan {
    /// Time the EV (and its driver) reaches the demander.
    pub fn arrival(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.fire_at)
    }
}

/// Decides the route of the EV at `supplier` without mutating anything.
/// The caller applies the claims (see [`DemandMatrix::claim`] and
/// [`ChargerAvailability::set`]) and queues the events.
pub fn plan_relocation(
    inst: &NetworkInstance,
    demand: &DemandMatrix,
    chargers: &ChargerAvailability,
    clock: f64,
    supplier: usize,
    ev_charge: u8,
) -> Result<RelocationPlan, RelocationError> {
    if demand.unclaimed() == 0 {
        return Err(RelocationError::NoOpenDemander);
    }
    let event = |fire_at, kind, node, ev_charge| DelayedEvent {
        fire_at,
        kind,
        node,
        driver_attached: true,
        ev_charge,
    };
    if ev_charge > inst.charge_threshold() {
        let demander = demand.nearest(supplier)?;
        let arrive = clock + inst.travel_minutes(supplier, demander);
        return Ok(RelocationPlan {
            supplier,
            ev_charge,
            charger: None,
            demander,
            events: vec![event(
                arrive,
                EventKind::EvArrivesAtDemander,
                demander,
                ev_charge,
            )],
        });
    }
    let charger = chargers.nearest(inst, supplier)?;
    let demander = demand.nearest(charger)?;
    let at_charger = clock + inst.travel_minutes(supplier, charger);
    let charged = at_charger + inst.charging_minutes(ev_charge);
    let at_demander = charged + inst.travel_minutes(charger, demander);
    let full = inst.charge_target();
    Ok(RelocationPlan {
        supplier,
        ev_charge,
        charger: Some(charger),
        demander,
        events: vec![
            event(
                at_charger,
                EventKind::EvArrivesAtCharger,
                charger,
                ev_charge,
            ),
            event(charged, EventKind::ChargingCompletes, charger, full),
            event(at_demander, EventKind::EvArrivesAtDemander, demander, full),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{FleetConfig, Node};

    #[test]
    fn nearest_open_examples() {
        assert_eq!(nearest_open(&[BIG, 3.0, 1.5]), Ok(2));
        assert_eq!(nearest_open(&[2.0, 2.0]), Ok(0));
        assert_eq!(
            nearest_open(&[BIG, BIG]),
            Err(RelocationError::NoOpenDemander)
        );
        assert_eq!(nearest_open(&[]), Err(RelocationError::NoOpenDemander));
    }

    /// Supplier at the origin, demanders 2.0 and 5.0 minutes away, one
    /// charger 1.5 minutes away.
    fn fixture(charge: u8) -> NetworkInstance {
        let mile_per_min = 45.0 / 60.0;
        let node = |id, x: f64, role, initial_charge| Node {
            id,
            x: x * mile_per_min / 10.0,
            y: 0.0,
            role,
            initial_charge,
        };
        // Distances in the x-direction are scaled down by 10 to fit the unit
        // square; the speed is scaled down to match.
        let nodes = vec![
            node(0, 0.2, NodeRole::Depot, 0),
            node(1, 0.0, NodeRole::Supplier, charge),
            node(2, 2.0, NodeRole::Demander, 0),
            node(3, 5.0, NodeRole::Demander, 0),
            node(4, 1.5, NodeRole::Charger, 0),
            node(5, 6.0, NodeRole::Supplier, 5),
        ];
        let mut fleet = FleetConfig::new(1, 2);
        fleet.speed_mph = 4.5;
        NetworkInstance::new(nodes, fleet, None).unwrap()
    }

    #[test]
    fn charged_ev_goes_straight_to_nearest_demander() {
        let inst = fixture(4);
        assert!((inst.travel_minutes(1, 2) - 2.0).abs() < 1e-9);
        let demand = DemandMatrix::new(&inst);
        let chargers = ChargerAvailability::new(&inst);
        let plan = plan_relocation(&inst, &demand, &chargers, 10.0, 1, 4).unwrap();
        assert_eq!(plan.charger, None);
        assert_eq!(plan.demander, 2);
        assert_eq!(plan.events.len(), 1);
        assert_eq!(plan.events[0].kind, EventKind::EvArrivesAtDemander);
        assert!((plan.arrival() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn low_ev_is_charged_first() {
        let inst = fixture(1);
        let demand = DemandMatrix::new(&inst);
        let chargers = ChargerAvailability::new(&inst);
        let plan = plan_relocation(&inst, &demand, &chargers, 0.0, 1, 1).unwrap();
        assert_eq!(plan.charger, Some(4));
        let kinds: Vec<_> = plan.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            [
                EventKind::EvArrivesAtCharger,
                EventKind::ChargingCompletes,
                EventKind::EvArrivesAtDemander
            ]
        );
        let charging = plan.events[1].fire_at - plan.events[0].fire_at;
        assert_eq!(charging, 4.0 * inst.per_level_charge_time());
        // From the charger (x=1.5) the nearest demander is node 2 (x=2.0).
        assert_eq!(plan.demander, 2);
    }

    #[test]
    fn charging_duration_formula() {
        let inst = fixture(1);
        let per_level = inst.per_level_charge_time();
        assert_eq!(inst.charging_minutes(1), 4.0 * per_level);
        assert_eq!(inst.charging_minutes(3), 2.0 * per_level);
        assert_eq!(inst.charging_minutes(5), 0.0);
    }

    #[test]
    fn threshold_rule_is_exact() {
        let inst = fixture(3);
        let demand = DemandMatrix::new(&inst);
        let chargers = ChargerAvailability::new(&inst);
        for level in 1..=5u8 {
            let plan = plan_relocation(&inst, &demand, &chargers, 0.0, 1, level).unwrap();
            assert_eq!(
                plan.charger.is_some(),
                level <= inst.charge_threshold(),
                "level {level}"
            );
        }
    }

    #[test]
    fn claims_and_blocking() {
        let inst = fixture(1);
        let mut demand = DemandMatrix::new(&inst);
        let mut chargers = ChargerAvailability::new(&inst);
        chargers.set(4, false);
        assert_eq!(
            plan_relocation(&inst, &demand, &chargers, 0.0, 1, 1),
            Err(RelocationError::NoChargerAvailable)
        );
        chargers.set(4, true);
        demand.claim(0);
        let plan = plan_relocation(&inst, &demand, &chargers, 0.0, 1, 1).unwrap();
        assert_eq!(plan.demander, 3);
        demand.claim(1);
        assert_eq!(
            plan_relocation(&inst, &demand, &chargers, 0.0, 1, 5),
            Err(RelocationError::NoOpenDemander)
        );
        assert_eq!(demand.row(0), vec![BIG, BIG]);
    }
}
