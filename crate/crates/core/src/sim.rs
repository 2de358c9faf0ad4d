//! Event-driven rebalancing environment.
//!
//! Shuttles leave the depot with drivers aboard. Dropping a driver at a
//! supplier starts a relocation chain (EV to charger if needed, then to a
//! demander); the driver stays with the EV and waits at the demander to be
//! picked up. Each call to [`Env::advance`] moves the clock to the earliest
//! completion of a shuttle action, firing due relocation events first.
//!
//! Immediate reward is the negative clock delta of the step, so the episode
//! return is exactly minus the makespan.

use crate::error::SimError;
use crate::event::{DelayedEvent, EventKind, EventQueue};
use crate::instance::{NetworkInstance, NodeRole};
use crate::relocation::{plan_relocation, ChargerAvailability, DemandMatrix, RelocationPlan};

pub const DEPOT: usize = 0;

/// Number of static per-node features: x, y, initial charge.
pub const STATIC_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispatch {
    pub target: usize,
    pub complete_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShuttleState {
    pub id: usize,
    /// Last node reached.
    pub location: usize,
    pub onboard: usize,
    pub action: Option<Dispatch>,
}

impl ShuttleState {
    pub fn current_action(&self) -> Option<usize> {
        self.action.map(|d| d.target)
    }

    pub fn action_complete_at(&self) -> Option<f64> {
        self.action.map(|d| d.complete_at)
    }

    pub fn is_ready(&self) -> bool {
        self.action.is_none()
    }
}

/// Full dynamic state. Vectors indexed by node unless noted.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub clock: f64,
    pub ev_present: Vec<bool>,
    pub ev_charge: Vec<u8>,
    pub drivers_at: Vec<usize>,
    pub expected_ev: Vec<bool>,
    pub expected_driver: Vec<bool>,
    pub chargers: ChargerAvailability,
    pub demand: DemandMatrix,
    /// Indexed by demander column of [`DemandMatrix`]; false once an EV arrived.
    pub demand_open: Vec<bool>,
    pub events: EventQueue,
    pub shuttles: Vec<ShuttleState>,
    /// Relocation chains in progress; each carries one EV and one driver.
    pub in_transit: usize,
    /// EVs received so far, indexed by charger column.
    pub charger_uses: Vec<usize>,
    pub steps: usize,
}

/// Result of [`Env::reset`] or [`Env::advance`]. Per-shuttle observations are
/// produced on demand by [`Env::observe`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub clock: f64,
    pub done: bool,
    pub truncated: bool,
    /// Shuttles without an action in flight, ascending.
    pub ready_shuttles: Vec<usize>,
    /// Legal action set of each ready shuttle, same order.
    pub masks: Vec<Vec<usize>>,
}

/// Feature selection for [`Env::observe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsConfig {
    pub distance: bool,
    /// Minutes until the next pending transition at each node.
    pub pending: bool,
}

impl Default for ObsConfig {
    fn default() -> Self {
        ObsConfig {
            distance: true,
            pending: true,
        }
    }
}

impl ObsConfig {
    /// ev, drivers, [distance], [pending], onboard.
    pub fn dynamic_features(&self) -> usize {
        3 + usize::from(self.distance) + usize::from(self.pending)
    }
}

/// Node features seen by one shuttle, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub n_nodes: usize,
    pub static_features: Vec<f64>,
    pub dynamic_features: Vec<f64>,
    pub dynamic_dim: usize,
    /// Node the shuttle last visited.
    pub location: usize,
}

impl Observation {
    pub fn static_row(&self, n: usize) -> &[f64] {
        &self.static_features[n * STATIC_FEATURES..(n + 1) * STATIC_FEATURES]
    }

    pub fn dynamic_row(&self, n: usize) -> &[f64] {
        &self.dynamic_features[n * self.dynamic_dim..(n + 1) * self.dynamic_dim]
    }
}

/// Static features of every node: x, y, initial charge.
pub fn static_features(inst: &NetworkInstance) -> Vec<f64> {
    inst.nodes()
        .iter()
        .flat_map(|n| [n.x, n.y, f64::from(n.initial_charge)])
        .collect()
}

#[derive(Debug, Clone)]
pub struct Env<'a> {
    inst: &'a NetworkInstance,
    state: EnvState,
    max_steps: usize,
    done: bool,
    truncated: bool,
}

impl<'a> Env<'a> {
    /// Fresh environment at clock 0 with every shuttle at the depot.
    pub fn new(inst: &'a NetworkInstance) -> Self {
        let mut env = Env {
            inst,
            state: Self::initial_state(inst),
            max_steps: 10 * inst.len(),
            done: false,
            truncated: false,
        };
        env.done = env.finished();
        env
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    fn initial_state(inst: &NetworkInstance) -> EnvState {
        let n = inst.len();
        let ev_charge: Vec<u8> = inst.nodes().iter().map(|nd| nd.initial_charge).collect();
        let chargers = ChargerAvailability::new(inst);
        let demand = DemandMatrix::new(inst);
        let shuttles = (0..inst.num_shuttles())
            .map(|id| ShuttleState {
                id,
                location: DEPOT,
                onboard: inst.drivers_per_shuttle(),
                action: None,
            })
            .collect();
        EnvState {
            clock: 0.0,
            ev_present: ev_charge.iter().map(|&c| c > 0).collect(),
            ev_charge,
            drivers_at: vec![0; n],
            expected_ev: vec![false; n],
            expected_driver: vec![false; n],
            charger_uses: vec![0; chargers.chargers().len()],
            demand_open: vec![true; demand.demanders().len()],
            chargers,
            demand,
            events: EventQueue::default(),
            shuttles,
            in_transit: 0,
            steps: 0,
        }
    }

    /// Restores the initial state and reports it.
    pub fn reset(&mut self) -> StepOutcome {
        self.state = Self::initial_state(self.inst);
        self.truncated = false;
        self.done = self.finished();
        self.outcome(0.0)
    }

    pub fn instance(&self) -> &'a NetworkInstance {
        self.inst
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn clock(&self) -> f64 {
        self.state.clock
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn steps(&self) -> usize {
        self.state.steps
    }

    pub fn shuttle(&self, id: usize) -> Option<&ShuttleState> {
        self.state.shuttles.get(id)
    }

    pub fn shuttles(&self) -> &[ShuttleState] {
        &self.state.shuttles
    }

    pub fn ready_shuttles(&self) -> Vec<usize> {
        self.state
            .shuttles
            .iter()
            .filter(|s| s.is_ready())
            .map(|s| s.id)
            .collect()
    }

    pub fn all_demand_fulfilled(&self) -> bool {
        self.state.demand_open.iter().all(|open| !open)
    }

    /// Drivers on shuttles, waiting at nodes, and driving EVs.
    pub fn drivers_accounted(&self) -> usize {
        let s = &self.state;
        s.shuttles.iter().map(|sh| sh.onboard).sum::<usize>()
            + s.drivers_at.iter().sum::<usize>()
            + s.in_transit
    }

    /// EVs parked at nodes plus EVs in relocation chains.
    pub fn evs_accounted(&self) -> usize {
        self.state.ev_present.iter().filter(|p| **p).count() + self.state.in_transit
    }

    /// True if some node holds or expects more than one EV.
    pub fn ev_capacity_violated(&self) -> bool {
        let s = &self.state;
        s.ev_present
            .iter()
            .zip(&s.expected_ev)
            .any(|(&p, &e)| usize::from(p) + usize::from(e) > 1)
    }

    /// Largest number of EVs any single charger has received.
    pub fn max_charger_reuse(&self) -> usize {
        self.state.charger_uses.iter().copied().max().unwrap_or(0)
    }

    fn drivers_outside(&self) -> usize {
        let onboard: usize = self.state.shuttles.iter().map(|s| s.onboard).sum();
        self.inst.total_drivers() - onboard
    }

    fn finished(&self) -> bool {
        self.all_demand_fulfilled()
            && self.drivers_outside() == 0
            && self
                .state
                .shuttles
                .iter()
                .all(|s| s.is_ready() && s.location == DEPOT)
    }

    fn is_dropoff_node(&self, n: usize) -> bool {
        self.inst.role(n) == NodeRole::Supplier && self.state.ev_present[n]
    }

    fn needs_charger(&self, n: usize) -> bool {
        self.state.ev_charge[n] <= self.inst.charge_threshold()
    }

    /// Legal next nodes for a shuttle with no action in flight, ascending.
    ///
    /// With drivers aboard the shuttle may visit nodes holding or expecting a
    /// driver (while it has a free seat) and suppliers whose EV can be
    /// relocated right now; with no driver aboard only driver nodes. Nodes
    /// targeted by another shuttle are excluded, as are drop-offs that the
    /// in-flight claims of other shuttles would leave without a demander or
    /// charger. Staying put is only legal while a driver is expected there.
    /// The depot opens once all demanders are served and the remaining
    /// outside drivers fit into the other shuttles.
    pub fn legal_actions(&self, shuttle: usize) -> Result<Vec<usize>, SimError> {
        let s = &self.state;
        let me = s
            .shuttles
            .get(shuttle)
            .ok_or(SimError::UnknownShuttle(shuttle))?;
        if !me.is_ready() {
            return Err(SimError::ShuttleBusy { shuttle });
        }
        let capacity = self.inst.drivers_per_shuttle();
        let has_seat = me.onboard < capacity;

        let mut claimed = vec![false; self.inst.len()];
        let mut reserved_demand = 0usize;
        let mut reserved_chargers = 0usize;
        for other in s.shuttles.iter().filter(|o| o.id != shuttle) {
            if let Some(d) = other.action {
                claimed[d.target] = true;
                if self.is_dropoff_node(d.target) {
                    reserved_demand += 1;
                    if self.needs_charger(d.target) {
                        reserved_chargers += 1;
                    }
                }
            }
        }
        let free_demand = s.demand.unclaimed().saturating_sub(reserved_demand);
        let free_chargers = s
            .chargers
            .count_available()
            .saturating_sub(reserved_chargers);

        let mut legal = Vec::new();
        if me.location != DEPOT && self.all_demand_fulfilled() {
            let spare_elsewhere: usize = s
                .shuttles
                .iter()
                .filter(|o| o.id != shuttle)
                .map(|o| capacity - o.onboard)
                .sum();
            if self.drivers_outside() <= spare_elsewhere {
                legal.push(DEPOT);
            }
        }
        for n in 1..self.inst.len() {
            if claimed[n] {
                continue;
            }
            let has_driver = s.drivers_at[n] > 0 || s.expected_driver[n];
            if n == me.location {
                if has_driver && has_seat {
                    legal.push(n);
                }
                continue;
            }
            if has_driver {
                if has_seat {
                    legal.push(n);
                }
                continue;
            }
            if me.onboard > 0
                && self.is_dropoff_node(n)
                && free_demand > 0
                && (!self.needs_charger(n) || free_chargers > 0)
            {
                legal.push(n);
            }
        }
        Ok(legal)
    }

    /// Minutes until `shuttle` would complete an action towards `node`:
    /// travel time, extended to the arrival of the node's inbound driver
    /// when one is still on its way.
    pub fn action_cost(&self, shuttle: usize, node: usize) -> f64 {
        self.completion_time(shuttle, node) - self.state.clock
    }

    fn completion_time(&self, shuttle: usize, node: usize) -> f64 {
        let s = &self.state;
        let here = s.shuttles[shuttle].location;
        let reach = s.clock + self.inst.travel_minutes(here, node);
        if node == DEPOT || s.drivers_at[node] > 0 {
            return reach;
        }
        s.events
            .next_at(node, EventKind::EvArrivesAtDemander)
            .map_or(reach, |e| e.fire_at.max(reach))
    }

    /// Assigns `node` to a ready shuttle without advancing the clock.
    pub fn dispatch(&mut self, shuttle: usize, node: usize) -> Result<(), SimError> {
        if self.done {
            return Err(SimError::EpisodeOver);
        }
        let legal = self.legal_actions(shuttle)?;
        if legal.binary_search(&node).is_err() {
            return Err(SimError::Infeasible { shuttle, node });
        }
        let complete_at = self.completion_time(shuttle, node);
        self.state.shuttles[shuttle].action = Some(Dispatch {
            target: node,
            complete_at,
        });
        Ok(())
    }

    /// Dispatches every `(shuttle, node)` pair in order, then advances.
    pub fn step(&mut self, actions: &[(usize, usize)]) -> Result<StepOutcome, SimError> {
        for &(shuttle, _) in actions {
            let sh = self
                .state
                .shuttles
                .get(shuttle)
                .ok_or(SimError::UnknownShuttle(shuttle))?;
            if !sh.is_ready() {
                return Err(SimError::ShuttleBusy { shuttle });
            }
        }
        for &(shuttle, node) in actions {
            self.dispatch(shuttle, node)?;
        }
        self.advance()
    }

    /// Moves the clock to the next decision event.
    ///
    /// The next event is the earliest shuttle completion; while some shuttle
    /// is idle, a relocation event that fires earlier also ends the step so
    /// idle shuttles can react to it.
    pub fn advance(&mut self) -> Result<StepOutcome, SimError> {
        if self.done {
            return Err(SimError::EpisodeOver);
        }
        let completion = self
            .state
            .shuttles
            .iter()
            .filter_map(|s| s.action_complete_at())
            .min_by(f64::total_cmp);
        let idle = self.state.shuttles.iter().any(|s| s.is_ready());
        let pending = self.state.events.peek_time();
        let next = match (completion, pending) {
            (Some(c), Some(p)) if idle => c.min(p),
            (Some(c), _) => c,
            (None, Some(p)) => p,
            (None, None) => {
                return Err(SimError::Deadlock {
                    clock: self.state.clock,
                })
            }
        };
        let next = next.max(self.state.clock);

        while let Some(ev) = self.state.events.pop_due(next) {
            self.fire(ev);
        }
        let previous = self.state.clock;
        self.state.clock = next;
        for id in 0..self.state.shuttles.len() {
            match self.state.shuttles[id].action {
                Some(d) if d.complete_at <= next => self.arrive(id, d.target)?,
                _ => {}
            }
        }
        self.state.steps += 1;
        self.done = self.finished();
        if !self.done && self.state.steps >= self.max_steps {
            self.done = true;
            self.truncated = true;
        }
        Ok(self.outcome(-(next - previous)))
    }

    fn outcome(&self, reward: f64) -> StepOutcome {
        let ready_shuttles = if self.done {
            Vec::new()
        } else {
            self.ready_shuttles()
        };
        let masks = ready_shuttles
            .iter()
            .map(|&s| self.legal_actions(s).unwrap_or_default())
            .collect();
        StepOutcome {
            reward,
            clock: self.state.clock,
            done: self.done,
            truncated: self.truncated,
            ready_shuttles,
            masks,
        }
    }

    fn fire(&mut self, ev: DelayedEvent) {
        let s = &mut self.state;
        match ev.kind {
            EventKind::EvArrivesAtCharger => {
                if let Some(c) = s.chargers.column_of(ev.node) {
                    s.charger_uses[c] += 1;
                }
            }
            EventKind::ChargingCompletes => {
                s.expected_ev[ev.node] = false;
                s.chargers.set(ev.node, true);
            }
            EventKind::EvArrivesAtDemander => {
                let n = ev.node;
                s.ev_present[n] = true;
                s.ev_charge[n] = ev.ev_charge;
                s.expected_ev[n] = false;
                s.expected_driver[n] = false;
                if ev.driver_attached {
                    s.drivers_at[n] += 1;
                }
                if let Some(col) = s.demand.column_of(n) {
                    s.demand_open[col] = false;
                }
                s.in_transit -= 1;
            }
        }
    }

    fn arrive(&mut self, id: usize, node: usize) -> Result<(), SimError> {
        let capacity = self.inst.drivers_per_shuttle();
        {
            let sh = &mut self.state.shuttles[id];
            sh.location = node;
            sh.action = None;
        }
        if node == DEPOT {
            return Ok(());
        }
        let onboard = self.state.shuttles[id].onboard;
        if self.state.drivers_at[node] > 0 && onboard < capacity {
            let boarding = self.state.drivers_at[node].min(capacity - onboard);
            self.state.drivers_at[node] -= boarding;
            self.state.shuttles[id].onboard += boarding;
        } else if onboard > 0 && self.is_dropoff_node(node) {
            let plan = plan_relocation(
                self.inst,
                &self.state.demand,
                &self.state.chargers,
                self.state.clock,
                node,
                self.state.ev_charge[node],
            )?;
            self.apply_plan(id, plan);
        }
        Ok(())
    }

    fn apply_plan(&mut self, shuttle: usize, plan: RelocationPlan) {
        let s = &mut self.state;
        s.shuttles[shuttle].onboard -= 1;
        s.ev_present[plan.supplier] = false;
        s.ev_charge[plan.supplier] = 0;
        s.in_transit += 1;
        if let Some(c) = plan.charger {
            s.chargers.set(c, false);
            s.expected_ev[c] = true;
        }
        if let Some(col) = s.demand.column_of(plan.demander) {
            s.demand.claim(col);
        }
        s.expected_ev[plan.demander] = true;
        s.expected_driver[plan.demander] = true;
        for ev in plan.events {
            s.events.push(ev);
        }
    }

    /// Node features from the point of view of `shuttle`.
    ///
    /// Dynamic columns: EV present or expected, drivers present or expected,
    /// travel minutes from the shuttle's location (if enabled), minutes
    /// until the node's next queued event fires, 0 when none (if enabled),
    /// and the shuttle's onboard driver count repeated on every row.
    pub fn observe(&self, shuttle: usize, cfg: ObsConfig) -> Observation {
        let s = &self.state;
        let sh = &s.shuttles[shuttle];
        let n = self.inst.len();
        let dim = cfg.dynamic_features();
        let mut dynamic_features = Vec::with_capacity(n * dim);
        let travel = self.inst.travel().row(sh.location);
        let mut pending = vec![0.0; n];
        if cfg.pending {
            let mut first = vec![f64::INFINITY; n];
            for e in s.events.iter() {
                first[e.node] = first[e.node].min(e.fire_at);
            }
            for (p, f) in pending.iter_mut().zip(first) {
                if f.is_finite() {
                    *p = (f - s.clock).max(0.0);
                }
            }
        }
        for node in 0..n {
            dynamic_features.push(f64::from(u8::from(
                s.ev_present[node] || s.expected_ev[node],
            )));
            dynamic_features
                .push(s.drivers_at[node] as f64 + f64::from(u8::from(s.expected_driver[node])));
            if cfg.distance {
                dynamic_features.push(travel[node]);
            }
            if cfg.pending {
                dynamic_features.push(pending[node]);
            }
            dynamic_features.push(sh.onboard as f64);
        }
        Observation {
            n_nodes: n,
            static_features: static_features(self.inst),
            dynamic_features,
            dynamic_dim: dim,
            location: sh.location,
        }
    }

    /// Latest time any queued relocation event fires.
    pub fn latest_pending_event(&self) -> Option<f64> {
        self.state.events.latest_time()
    }

    pub fn pending_events(&self) -> impl Iterator<Item = &DelayedEvent> {
        self.state.events.iter()
    }
}
