//! Two-stage menu: pick one of four clusters, then one of its three items.
//!
//! In the item stage the cluster's right-slot item sits at Right, the
//! left-slot item at Left, the middle item drops to Down and Up becomes
//! Back. Staying more than [`STAGE_TIMEOUT_MS`] in one stage resets to the
//! cluster stage.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zone::Direction;

/// Longest time the menu may sit in one stage; the comparison is strict.
pub const STAGE_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("reading catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing catalog: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

// ── Catalog ─────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub icon: String,
}

/// Position of an item inside its cluster on the cluster screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Left,
    Middle,
    Right,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Left, Slot::Middle, Slot::Right];

    /// Where the slot appears in the item stage; `None` is Back.
    pub fn from_item_direction(d: Direction) -> Option<Slot> {
        match d {
            Direction::Left => Some(Slot::Left),
            Direction::Down => Some(Slot::Middle),
            Direction::Right => Some(Slot::Right),
            Direction::Up => None,
        }
    }

    pub fn item_direction(self) -> Direction {
        match self {
            Slot::Left => Direction::Left,
            Slot::Middle => Direction::Down,
            Slot::Right => Direction::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cluster {
    pub left: Item,
    pub middle: Item,
    pub right: Item,
}

impl Cluster {
    pub fn item(&self, slot: Slot) -> &Item {
        match slot {
            Slot::Left => &self.left,
            Slot::Middle => &self.middle,
            Slot::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    up: Cluster,
    down: Cluster,
    left: Cluster,
    right: Cluster,
}

/// Four direction-keyed clusters of three slot-keyed items, 12 distinct ids.
///
/// JSON form: `{"up": {"left": item, "middle": item, "right": item}, "down":
/// ..., "left": ..., "right": ...}` with `item = {"id", "name", "icon"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCatalog", into = "RawCatalog")]
pub struct Catalog {
    clusters: BTreeMap<Direction, Cluster>,
}

impl TryFrom<RawCatalog> for Catalog {
    type Error = String;

    fn try_from(raw: RawCatalog) -> Result<Self, Self::Error> {
        let clusters = BTreeMap::from([
            (Direction::Up, raw.up),
            (Direction::Down, raw.down),
            (Direction::Left, raw.left),
            (Direction::Right, raw.right),
        ]);
        let mut seen = HashSet::new();
        for c in clusters.values() {
            for s in Slot::ALL {
                let id = &c.item(s).id;
                if id.is_empty() {
                    return Err("empty item id".into());
                }
                if !seen.insert(id.clone()) {
                    return Err(format!("duplicate item id {id:?}"));
                }
            }
        }
        Ok(Self { clusters })
    }
}

impl From<Catalog> for RawCatalog {
    fn from(mut c: Catalog) -> Self {
        let mut take = |d| c.clusters.remove(&d).expect("catalog has all four clusters");
        RawCatalog {
            up: take(Direction::Up),
            down: take(Direction::Down),
            left: take(Direction::Left),
            right: take(Direction::Right),
        }
    }
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        serde_json::from_str::<RawCatalog>(text)?
            .try_into()
            .map_err(CatalogError::Invalid)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn cluster(&self, d: Direction) -> &Cluster {
        &self.clusters[&d]
    }

    pub fn items(&self) -> impl Iterator<Item = (Direction, Slot, &Item)> + '_ {
        self.clusters
            .iter()
            .flat_map(|(d, c)| Slot::ALL.into_iter().map(move |s| (*d, s, c.item(s))))
    }

    /// Cluster direction and slot of an item id.
    pub fn locate(&self, id: &str) -> Option<(Direction, Slot)> {
        self.items().find(|(_, _, i)| i.id == id).map(|(d, s, _)| (d, s))
    }

    /// The two confirmations that select `id` from the cluster stage.
    pub fn path_to(&self, id: &str) -> Option<[Direction; 2]> {
        self.locate(id).map(|(d, s)| [d, s.item_direction()])
    }

    pub fn ids(&self) -> Vec<String> {
        self.items().map(|(_, _, i)| i.id.clone()).collect()
    }
}

fn item(id: &str, name: &str) -> Item {
    Item {
        id: id.into(),
        name: name.into(),
        icon: format!("icons/{id}.svg"),
    }
}

impl Default for Catalog {
    /// A fast-food catalog: burgers and snacks up, chicken and sides down,
    /// desserts left, drinks right.
    fn default() -> Self {
        let c = |l: (&str, &str), m: (&str, &str), r: (&str, &str)| Cluster {
            left: item(l.0, l.1),
            middle: item(m.0, m.1),
            right: item(r.0, r.1),
        };
        RawCatalog {
            up: c(("pizza", "Pizza"), ("burger", "Burger"), ("hot_dog", "Hot dog")),
            down: c(
                ("chicken_drumstick", "Chicken drumstick"),
                ("chips", "Chips"),
                ("popcorn", "Popcorn"),
            ),
            left: c(("ice_cream", "Ice cream"), ("donut", "Donut"), ("cake", "Cake")),
            right: c(("coffee", "Coffee"), ("cola", "Cola"), ("orange_juice", "Orange juice")),
        }
        .try_into()
        .expect("default catalog is valid")
    }
}

// ── Layout ──────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "cluster", rename_all = "snake_case")]
pub enum Stage {
    Cluster,
    Item(Direction),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tile {
    /// A whole cluster, items in left/middle/right order.
    Cluster {
        items: [String; 3],
    },
    Item {
        id: String,
    },
    Back,
}

/// What the screen shows at each arrow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLayout {
    #[serde(flatten)]
    pub stage: Stage,
    pub up: Tile,
    pub down: Tile,
    pub left: Tile,
    pub right: Tile,
}

impl StageLayout {
    pub fn tile(&self, d: Direction) -> &Tile {
        match d {
            Direction::Up => &self.up,
            Direction::Down => &self.down,
            Direction::Left => &self.left,
            Direction::Right => &self.right,
        }
    }
}

pub fn layout(stage: Stage, catalog: &Catalog) -> StageLayout {
    let tile = |d: Direction| match stage {
        Stage::Cluster => {
            let c = catalog.cluster(d);
            Tile::Cluster {
                items: [c.left.id.clone(), c.middle.id.clone(), c.right.id.clone()],
            }
        }
        Stage::Item(c) => match Slot::from_item_direction(d) {
            Some(s) => Tile::Item {
                id: catalog.cluster(c).item(s).id.clone(),
            },
            None => Tile::Back,
        },
    };
    StageLayout {
        stage,
        up: tile(Direction::Up),
        down: tile(Direction::Down),
        left: tile(Direction::Left),
        right: tile(Direction::Right),
    }
}

// ── Engine ──────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    False,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum MenuAction {
    ClusterSelected {
        direction: Direction,
    },
    ItemSelected {
        item_id: String,
    },
    Back,
    TimedOut,
    TrialEnded {
        target: String,
        outcome: Outcome,
        #[serde(skip_serializing_if = "Option::is_none")]
        completion_ms: Option<u64>,
    },
    /// The last experiment target has been presented.
    ExperimentFinished,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MenuMode {
    Kiosk,
    Experiment {
        targets: Vec<String>,
        index: usize,
        trial_started_ms: u64,
    },
}

#[derive(Debug, Clone)]
pub struct MenuEngine {
    catalog: Catalog,
    stage: Stage,
    stage_entered_ms: u64,
    mode: MenuMode,
}

impl MenuEngine {
    pub fn new(catalog: Catalog, t_ms: u64) -> Self {
        Self {
            catalog,
            stage: Stage::Cluster,
            stage_entered_ms: t_ms,
            mode: MenuMode::Kiosk,
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn stage_entered_ms(&self) -> u64 {
        self.stage_entered_ms
    }

    pub fn mode(&self) -> &MenuMode {
        &self.mode
    }

    pub fn layout(&self) -> StageLayout {
        layout(self.stage, &self.catalog)
    }

    /// Current experiment target, if any.
    pub fn target(&self) -> Option<&str> {
        match &self.mode {
            MenuMode::Experiment { targets, index, .. } => targets.get(*index).map(String::as_str),
            MenuMode::Kiosk => None,
        }
    }

    /// Starts an experiment at `t_ms` from the cluster stage. Unknown ids
    /// are rejected without touching the engine.
    pub fn start_experiment(&mut self, targets: Vec<String>, t_ms: u64) -> Result<(), String> {
        if targets.is_empty() {
            return Err("no experiment targets".into());
        }
        if let Some(bad) = targets.iter().find(|t| self.catalog.locate(t).is_none()) {
            return Err(format!("unknown target item {bad:?}"));
        }
        self.mode = MenuMode::Experiment {
            targets,
            index: 0,
            trial_started_ms: t_ms,
        };
        self.enter(Stage::Cluster, t_ms);
        Ok(())
    }

    fn enter(&mut self, stage: Stage, t_ms: u64) {
        self.stage = stage;
        self.stage_entered_ms = t_ms;
    }

    fn end_trial(&mut self, outcome: Outcome, t_ms: u64, out: &mut Vec<MenuAction>) {
        let MenuMode::Experiment {
            targets,
            index,
            trial_started_ms,
        } = &mut self.mode
        else {
            return;
        };
        let target = targets[*index].clone();
        out.push(MenuAction::TrialEnded {
            target,
            outcome,
            completion_ms: (outcome != Outcome::Missed).then(|| t_ms - *trial_started_ms),
        });
        *index += 1;
        *trial_started_ms = t_ms;
        if *index >= targets.len() {
            self.mode = MenuMode::Kiosk;
            out.push(MenuAction::ExperimentFinished);
        }
    }

    /// Applies a confirmed direction.
    pub fn advance(&mut self, confirmed: Direction, t_ms: u64) -> Vec<MenuAction> {
        let mut out = Vec::new();
        match self.stage {
            Stage::Cluster => {
                self.enter(Stage::Item(confirmed), t_ms);
                out.push(MenuAction::ClusterSelected { direction: confirmed });
            }
            Stage::Item(c) => match Slot::from_item_direction(confirmed) {
                None => {
                    self.enter(Stage::Cluster, t_ms);
                    out.push(MenuAction::Back);
                }
                Some(slot) => {
                    let id = self.catalog.cluster(c).item(slot).id.clone();
                    let outcome = match self.target() {
                        Some(t) if t == id => Outcome::Correct,
                        _ => Outcome::False,
                    };
                    out.push(MenuAction::ItemSelected { item_id: id });
                    self.end_trial(outcome, t_ms, &mut out);
                    self.enter(Stage::Cluster, t_ms);
                }
            },
        }
        out
    }

    /// Enforces the stage timeout. The kiosk's cluster screen waits
    /// indefinitely; every other stage times out.
    pub fn tick(&mut self, now_ms: u64) -> Vec<MenuAction> {
        let mut out = Vec::new();
        let can_time_out = !(self.stage == Stage::Cluster && self.mode == MenuMode::Kiosk);
        if can_time_out && now_ms.saturating_sub(self.stage_entered_ms) > STAGE_TIMEOUT_MS {
            out.push(MenuAction::TimedOut);
            self.end_trial(Outcome::Missed, now_ms, &mut out);
            self.enter(Stage::Cluster, now_ms);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    #[test]
    fn default_catalog_round_trips() {
        let c = Catalog::default();
        assert_eq!(c.ids().len(), 12);
        let back = Catalog::from_json(&c.to_json_pretty()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let json = Catalog::default().to_json_pretty().replace("\"chips\"", "\"popcorn\"");
        assert!(matches!(Catalog::from_json(&json), Err(CatalogError::Invalid(_))));
    }

    #[test]
    fn cluster_layout_shows_down_cluster() {
        let l = layout(Stage::Cluster, &Catalog::default());
        assert_eq!(
            l.down,
            Tile::Cluster {
                items: ["chicken_drumstick".into(), "chips".into(), "popcorn".into()]
            }
        );
    }

    #[test]
    fn item_layout_rearranges() {
        let l = layout(Stage::Item(Down), &Catalog::default());
        assert_eq!(
            l.left,
            Tile::Item {
                id: "chicken_drumstick".into()
            }
        );
        assert_eq!(l.down, Tile::Item { id: "chips".into() });
        assert_eq!(l.right, Tile::Item { id: "popcorn".into() });
        assert_eq!(l.up, Tile::Back);
    }

    #[test]
    fn walkthrough_selects_target() {
        let mut m = MenuEngine::new(Catalog::default(), 0);
        m.start_experiment(vec!["chicken_drumstick".into(), "cola".into()], 0)
            .unwrap();
        assert_eq!(
            m.advance(Down, 1500),
            vec![MenuAction::ClusterSelected { direction: Down }]
        );
        assert_eq!(
            m.advance(Left, 3000),
            vec![
                MenuAction::ItemSelected {
                    item_id: "chicken_drumstick".into()
                },
                MenuAction::TrialEnded {
                    target: "chicken_drumstick".into(),
                    outcome: Outcome::Correct,
                    completion_ms: Some(3000)
                },
            ]
        );
        assert_eq!(m.stage(), Stage::Cluster);
        assert_eq!(m.target(), Some("cola"));
    }

    #[test]
    fn back_returns_to_clusters() {
        let mut m = MenuEngine::new(Catalog::default(), 0);
        m.advance(Down, 100);
        assert_eq!(m.advance(Up, 200), vec![MenuAction::Back]);
        assert_eq!(m.stage(), Stage::Cluster);
    }

    #[test]
    fn wrong_item_is_false() {
        let mut m = MenuEngine::new(Catalog::default(), 0);
        m.start_experiment(vec!["chicken_drumstick".into()], 0).unwrap();
        m.advance(Down, 1000);
        let a = m.advance(Down, 2000);
        assert_eq!(
            a[0],
            MenuAction::ItemSelected {
                item_id: "chips".into()
            }
        );
        assert!(matches!(
            a[1],
            MenuAction::TrialEnded {
                outcome: Outcome::False,
                ..
            }
        ));
        assert_eq!(a[2], MenuAction::ExperimentFinished);
        assert_eq!(m.mode(), &MenuMode::Kiosk);
    }

    #[test]
    fn item_stage_timeout_is_strict() {
        let mut m = MenuEngine::new(Catalog::default(), 0);
        m.start_experiment(vec!["chips".into(), "cola".into()], 0).unwrap();
        m.advance(Down, 0);
        assert!(m.tick(9_999).is_empty());
        assert!(m.tick(10_000).is_empty());
        assert_eq!(
            m.tick(10_001),
            vec![
                MenuAction::TimedOut,
                MenuAction::TrialEnded {
                    target: "chips".into(),
                    outcome: Outcome::Missed,
                    completion_ms: None
                },
            ]
        );
        assert_eq!(m.stage(), Stage::Cluster);
        assert_eq!(m.target(), Some("cola"));
    }

    #[test]
    fn cluster_stage_times_out_only_in_experiments() {
        let mut kiosk = MenuEngine::new(Catalog::default(), 0);
        assert!(kiosk.tick(50_000).is_empty());
        let mut exp = MenuEngine::new(Catalog::default(), 0);
        exp.start_experiment(vec!["cola".into()], 0).unwrap();
        let a = exp.tick(10_001);
        assert_eq!(a[0], MenuAction::TimedOut);
        assert!(matches!(
            a[1],
            MenuAction::TrialEnded {
                outcome: Outcome::Missed,
                ..
            }
        ));
    }

    #[test]
    fn experiment_rejects_unknown_target() {
        let mut m = MenuEngine::new(Catalog::default(), 0);
        assert!(m.start_experiment(vec!["sushi".into()], 0).is_err());
        assert_eq!(m.mode(), &MenuMode::Kiosk);
    }
}
