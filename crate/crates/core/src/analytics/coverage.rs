//! Best-server SINR, dead zones and SINR along a route.
//!
//! The interference seen by a user served by `b` is the total radio-map
//! power minus `b`'s own contribution, clamped at zero.

use serde::{Deserialize, Serialize};

use super::components;
use crate::error::{Error, Result};
use crate::field::{db_to_watts, Geometry, Grid2D, Unit, DB_FLOOR};

fn sinr_db(signal_w: f64, total_w: f64, noise_w: f64) -> f64 {
    let ratio = signal_w / ((total_w - signal_w).max(0.0) + noise_w);
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

fn check_inputs(gain_maps_db: &[Grid2D], interference: &Grid2D, tx_powers_w: &[f64]) -> Result<()> {
    if gain_maps_db.is_empty() {
        return Err(Error::InvalidInput("at least one base station is required".into()));
    }
    if gain_maps_db.len() != tx_powers_w.len() {
        return Err(Error::InvalidInput(format!(
            "{} gain maps but {} powers",
            gain_maps_db.len(),
            tx_powers_w.len()
        )));
    }
    if tx_powers_w.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidInput("transmit powers must be positive".into()));
    }
    for g in gain_maps_db {
        g.geometry().ensure_same(interference.geometry())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    /// Best-server SINR, dB.
    pub sinr_db: Grid2D,
    /// Index of the serving base station per cell.
    pub best_server: Vec<usize>,
    pub dead: Vec<bool>,
    /// 4-connected dead components, as row-major cell indices.
    pub components: Vec<Vec<usize>>,
}

impl Coverage {
    pub fn dead_fraction(&self) -> f64 {
        self.dead.iter().filter(|&&d| d).count() as f64 / self.dead.len() as f64
    }
}

/// Best-server SINR per cell; cells below `sinr_threshold_db` are dead.
///
/// `gain_maps_db` are channel-gain maps (dB) of the candidate servers,
/// `interference` the radio map of total received power.
pub fn dead_zones(
    gain_maps_db: &[Grid2D],
    interference: &Grid2D,
    tx_powers_w: &[f64],
    noise_dbw: f64,
    sinr_threshold_db: f64,
) -> Result<Coverage> {
    check_inputs(gain_maps_db, interference, tx_powers_w)?;
    let geo = *interference.geometry();
    let total = interference.from_db();
    let gains: Vec<Grid2D> = gain_maps_db.iter().map(Grid2D::to_db).collect();
    let noise = db_to_watts(noise_dbw);
    let mut sinr = Vec::with_capacity(geo.n_cells());
    let mut best_server = Vec::with_capacity(geo.n_cells());
    for i in 0..geo.n_cells() {
        let mut best = (f64::NEG_INFINITY, 0);
        for (b, g) in gains.iter().enumerate() {
            let s = tx_powers_w[b] * db_to_watts(g.values()[i]);
            let v = sinr_db(s, total.values()[i], noise);
            if v > best.0 {
                best = (v, b);
            }
        }
        sinr.push(best.0);
        best_server.push(best.1);
    }
    let dead: Vec<bool> = sinr.iter().map(|&v| v < sinr_threshold_db).collect();
    Ok(Coverage {
        sinr_db: Grid2D::new(geo, sinr, Unit::Db)?,
        best_server,
        components: components(&geo, &dead),
        dead,
    })
}

/// Ordered waypoints with the serving base station of each leg. The last
/// waypoint keeps the server of the final leg; a single-point route carries
/// one server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub waypoints: Vec<(f64, f64)>,
    pub serving: Vec<usize>,
}

impl Route {
    pub fn new(waypoints: Vec<(f64, f64)>, serving: Vec<usize>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidInput("route needs at least one waypoint".into()));
        }
        let legs = waypoints.len().saturating_sub(1).max(1);
        if serving.len() != legs {
            return Err(Error::InvalidInput(format!(
                "route with {} waypoints needs {legs} serving entries, got {}",
                waypoints.len(),
                serving.len()
            )));
        }
        Ok(Route { waypoints, serving })
    }

    pub fn server_at(&self, waypoint: usize) -> usize {
        self.serving[waypoint.min(self.serving.len() - 1)]
    }

    /// Inserts points so that consecutive waypoints are at most `step_m`
    /// apart, keeping each leg's server.
    pub fn densified(&self, step_m: f64) -> Result<Route> {
        if !(step_m > 0.0) {
            return Err(Error::InvalidInput("step must be positive".into()));
        }
        if self.waypoints.len() < 2 {
            return Ok(self.clone());
        }
        let mut waypoints = vec![self.waypoints[0]];
        let mut serving = Vec::new();
        for (leg, w) in self.waypoints.windows(2).enumerate() {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let n = ((x1 - x0).hypot(y1 - y0) / step_m).ceil().max(1.0) as usize;
            for k in 1..=n {
                let t = k as f64 / n as f64;
                waypoints.push((x0 + t * (x1 - x0), y0 + t * (y1 - y0)));
                serving.push(self.serving[leg]);
            }
        }
        Route::new(waypoints, serving)
    }
}

/// SINR (dB) at one point served by `server`, sampling the maps bilinearly
/// in dB.
pub fn sinr_at(
    x: f64,
    y: f64,
    server: usize,
    gain_maps_db: &[Grid2D],
    interference: &Grid2D,
    tx_powers_w: &[f64],
    noise_dbw: f64,
) -> Result<f64> {
    check_inputs(gain_maps_db, interference, tx_powers_w)?;
    let g = gain_maps_db
        .get(server)
        .ok_or_else(|| Error::InvalidInput(format!("unknown server index {server}")))?;
    // both maps are interpolated in dB so that a server that is the only
    // contributor leaves exactly zero residual interference between cells
    let s = tx_powers_w[server] * db_to_watts(g.to_db().sample_bilinear(x, y)?);
    let total = db_to_watts(interference.to_db().sample_bilinear(x, y)?);
    Ok(sinr_db(s, total, db_to_watts(noise_dbw)))
}

/// SINR (dB) at every waypoint with its assigned server.
pub fn sinr_along_route(
    route: &Route,
    gain_maps_db: &[Grid2D],
    interference: &Grid2D,
    tx_powers_w: &[f64],
    noise_dbw: f64,
) -> Result<Vec<f64>> {
    route
        .waypoints
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| sinr_at(x, y, route.server_at(i), gain_maps_db, interference, tx_powers_w, noise_dbw))
        .collect()
}

/// Received-power map of `gain_maps_db` scaled by `tx_powers_w`, summed, in
/// watts; a convenience for building the interference input.
pub fn total_power(gain_maps_db: &[Grid2D], tx_powers_w: &[f64], geometry: &Geometry) -> Result<Grid2D> {
    let mut acc = vec![0.0; geometry.n_cells()];
    for (g, p) in gain_maps_db.iter().zip(tx_powers_w) {
        g.geometry().ensure_same(geometry)?;
        for (a, v) in acc.iter_mut().zip(g.to_db().values()) {
            *a += p * db_to_watts(*v);
        }
    }
    Grid2D::new(*geometry, acc, Unit::LinearWatts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn geo() -> Geometry {
        Geometry::new(0.0, 0.0, 100.0, 20, 20).unwrap()
    }

    fn gain_from(tx: (f64, f64)) -> Grid2D {
        Grid2D::from_fn(geo(), Unit::Db, |_, _, x, y| -30.0 - 35.0 * (x - tx.0).hypot(y - tx.1).max(50.0).log10()).unwrap()
    }

    #[test]
    fn noise_only_single_station() {
        let g = gain_from((1_000.0, 1_000.0));
        let i = total_power(std::slice::from_ref(&g), &[1.0], &geo()).unwrap();
        let cov = dead_zones(std::slice::from_ref(&g), &i, &[1.0], -170.0, 0.0).unwrap();
        let edge = cov.sinr_db.min();
        assert!(edge > 0.0);
        let cov = dead_zones(&[g], &i, &[1.0], -170.0, edge - 1.0).unwrap();
        assert!(cov.dead.iter().all(|d| !d));
        assert!(cov.components.is_empty());
    }

    #[test]
    fn blocked_cell_is_dead() {
        let g = gain_from((1_000.0, 1_000.0));
        let mut v = g.values().to_vec();
        v[geo().index(3, 4)] = DB_FLOOR;
        let g = Grid2D::new(geo(), v, Unit::Db).unwrap();
        let i = total_power(std::slice::from_ref(&g), &[1.0], &geo()).unwrap();
        let cov = dead_zones(&[g], &i, &[1.0], -170.0, 0.0).unwrap();
        assert_eq!(cov.dead.iter().filter(|&&d| d).count(), 1);
        assert!(cov.dead[geo().index(3, 4)]);
        assert_eq!(cov.components, vec![vec![geo().index(3, 4)]]);
    }

    #[test]
    fn adding_a_station_never_enlarges_the_mask() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = r.random_range(1..5);
            let gains: Vec<Grid2D> = (0..=n)
                .map(|_| gain_from((r.random_range(0.0..2_000.0), r.random_range(0.0..2_000.0))))
                .collect();
            let powers: Vec<f64> = (0..=n).map(|_| r.random_range(0.1..10.0)).collect();
            // the radio map is fixed: every station radiates regardless of service
            let i = total_power(&gains, &powers, &geo()).unwrap();
            let thr = r.random_range(-10.0..10.0);
            let few = dead_zones(&gains[..n], &i, &powers[..n], -110.0, thr).unwrap();
            let more = dead_zones(&gains, &i, &powers, -110.0, thr).unwrap();
            assert!(few.dead.iter().zip(&more.dead).all(|(a, b)| *a || !*b));
            let higher = dead_zones(&gains, &i, &powers, -110.0, thr + 3.0).unwrap();
            assert!(more.dead.iter().zip(&higher.dead).all(|(a, b)| !*a || *b));
        }
    }

    #[test]
    fn single_point_route_matches_formula() {
        let g = gain_from((600.0, 1_400.0));
        let i = Grid2D::filled(geo(), 1e-11, Unit::LinearWatts).unwrap();
        let (x, y) = geo().cell_center(5, 9);
        let route = Route::new(vec![(x, y)], vec![0]).unwrap();
        let got = sinr_along_route(&route, std::slice::from_ref(&g), &i, &[2.0], -100.0).unwrap();
        let s = 2.0 * db_to_watts(g.get(5, 9));
        let want = 10.0 * (s / ((1e-11 - s).max(0.0) + 1e-10)).log10();
        assert!((got[0] - want).abs() < 1e-9);
    }

    #[test]
    fn zero_interference_gives_snr() {
        let g = gain_from((600.0, 1_400.0));
        let i = Grid2D::filled(geo(), 0.0, Unit::LinearWatts).unwrap();
        let route = Route::new(vec![(150.0, 150.0), (1_850.0, 950.0)], vec![0]).unwrap().densified(100.0).unwrap();
        let got = sinr_along_route(&route, std::slice::from_ref(&g), &i, &[2.0], -100.0).unwrap();
        for (k, &(x, y)) in route.waypoints.iter().enumerate() {
            let s = 2.0 * db_to_watts(g.sample_bilinear(x, y).unwrap());
            assert!((got[k] - 10.0 * (s / 1e-10).log10()).abs() < 1e-9);
        }
    }

    #[test]
    fn lone_server_sees_no_interference_between_cells() {
        let g = gain_from((1_030.0, 970.0));
        let i = total_power(std::slice::from_ref(&g), &[1.5], &geo()).unwrap();
        let route = Route::new(vec![(720.0, 1_010.0), (1_390.0, 930.0)], vec![0]).unwrap().densified(17.0).unwrap();
        let got = sinr_along_route(&route, std::slice::from_ref(&g), &i, &[1.5], -150.0).unwrap();
        for (k, &(x, y)) in route.waypoints.iter().enumerate() {
            let snr = 10.0 * (1.5 * db_to_watts(g.sample_bilinear(x, y).unwrap()) / db_to_watts(-150.0)).log10();
            assert!((got[k] - snr).abs() < 1e-6, "waypoint {k}: {} vs {snr}", got[k]);
        }
    }

    #[test]
    fn route_validation() {
        assert!(Route::new(vec![], vec![]).is_err());
        assert!(Route::new(vec![(0.0, 0.0), (1.0, 1.0)], vec![0, 1]).is_err());
        let g = gain_from((0.0, 0.0));
        let i = Grid2D::filled(geo(), 0.0, Unit::LinearWatts).unwrap();
        let far = Route::new(vec![(5_000.0, 0.0)], vec![0]).unwrap();
        assert!(matches!(sinr_along_route(&far, &[g], &i, &[1.0], -100.0), Err(Error::OutOfBounds { .. })));
    }
}
