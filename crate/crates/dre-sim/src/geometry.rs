//! Planar geometry, arena bounds, entity placement, and reader mobility.
//!
//! Everything here is pure: callers own the RNG streams, so concurrent
//! sweep workers can use these functions without shared state.

use rand::Rng;

/// A position in the arena plane, in metres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Euclidean distance between two points.
#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Inclusive range test on squared distances, avoiding the square root.
#[inline]
pub fn within(a: Point, b: Point, range: f64) -> bool {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy <= range * range
}

/// True when `b` sits within a reader's tag-reading disk centred on `a`.
/// The boundary is inclusive: a tag exactly at `read_range` is readable.
#[inline]
pub fn in_read_range(a: Point, b: Point, read_range: f64) -> bool {
    within(a, b, read_range)
}

/// True when two readers can interfere with each other.
/// The boundary is inclusive, mirroring [`in_read_range`].
#[inline]
pub fn in_interference_range(a: Point, b: Point, interference_range: f64) -> bool {
    within(a, b, interference_range)
}

/// Rectangular arena with its origin at (0, 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Arena {
    pub fn new(width: f64, height: f64) -> Self {
        Arena { width, height }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    /// Draw a point uniformly inside the arena.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Point {
        Point {
            x: rng.gen_range(0.0..self.width),
            y: rng.gen_range(0.0..self.height),
        }
    }
}

/// Place `n` entities independently and uniformly in the arena.
pub fn place_uniform<R: Rng>(n: usize, arena: &Arena, rng: &mut R) -> Vec<Point> {
    (0..n).map(|_| arena.sample_point(rng)).collect()
}

/// Which movement rule the readers follow. Tags are always static.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MobilityModel {
    Static,
    RandomWaypoint,
}

/// Mobility parameters; speeds are metres per second, pause in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobilityConfig {
    pub model: MobilityModel,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause: f64,
}

impl MobilityConfig {
    pub fn fixed() -> Self {
        MobilityConfig {
            model: MobilityModel::Static,
            speed_min: 0.0,
            speed_max: 0.0,
            pause: 0.0,
        }
    }
}

/// Per-reader random-waypoint progress: where it is heading and how fast.
#[derive(Clone, Copy, Debug)]
pub struct WaypointState {
    pub target: Point,
    pub speed: f64,
    pub pause_left: f64,
}

fn draw_leg<R: Rng>(config: &MobilityConfig, arena: &Arena, rng: &mut R) -> WaypointState {
    let speed = if config.speed_max > config.speed_min {
        rng.gen_range(config.speed_min..config.speed_max)
    } else {
        config.speed_min
    };
    WaypointState {
        target: arena.sample_point(rng),
        speed,
        pause_left: 0.0,
    }
}

/// Advance one reader by `dt` seconds under the configured mobility model.
///
/// Waypoint legs are drawn lazily; on arrival the reader pauses for
/// `config.pause` seconds and then draws a fresh target and speed. Targets
/// are always inside the arena, so straight-line motion never leaves it.
pub fn step_reader<R: Rng>(
    mut pos: Point,
    state: &mut Option<WaypointState>,
    config: &MobilityConfig,
    dt: f64,
    arena: &Arena,
    rng: &mut R,
) -> Point {
    if config.model == MobilityModel::Static || dt <= 0.0 {
        return pos;
    }
    let mut remaining = dt;
    // Bounded pass count guards against zero-length legs at zero speed.
    for _ in 0..10_000 {
        if remaining <= 0.0 {
            break;
        }
        let leg = match state {
            Some(leg) => leg,
            None => {
                *state = Some(draw_leg(config, arena, rng));
                state.as_mut().unwrap()
            }
        };
        if leg.pause_left > 0.0 {
            let wait = leg.pause_left.min(remaining);
            leg.pause_left -= wait;
            remaining -= wait;
            continue;
        }
        if leg.speed <= 0.0 {
            break;
        }
        let dist_left = distance(pos, leg.target);
        let reach = leg.speed * remaining;
        if reach < dist_left {
            let f = reach / dist_left;
            pos = Point {
                x: pos.x + (leg.target.x - pos.x) * f,
                y: pos.y + (leg.target.y - pos.y) * f,
            };
            remaining = 0.0;
        } else {
            pos = leg.target;
            remaining -= if leg.speed > 0.0 { dist_left / leg.speed } else { 0.0 };
            let pause = config.pause;
            *state = Some(draw_leg(config, arena, rng));
            state.as_mut().unwrap().pause_left = pause;
        }
    }
    pos
}

/// Advance every reader by `dt`, one RNG stream per reader.
pub fn step_mobility<R: Rng>(
    positions: &mut [Point],
    states: &mut [Option<WaypointState>],
    config: &MobilityConfig,
    dt: f64,
    arena: &Arena,
    rngs: &mut [R],
) {
    for i in 0..positions.len() {
        positions[i] = step_reader(positions[i], &mut states[i], config, dt, arena, &mut rngs[i]);
    }
}
