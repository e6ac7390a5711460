#![allow(dead_code)]

use lpm_core::{validate_layout, Layout, Point};
use rand::Rng;

/// Stations scattered around a circle (d = 2) or sphere (d = 3) of random
/// radius and centre; retried until the layout validates.
pub fn random_layout<R: Rng>(rng: &mut R, n: usize, d: usize) -> Layout<f64> {
    loop {
        let radius = rng.random_range(5.0..50.0);
        let centre: Vec<f64> = (0..d).map(|_| rng.random_range(-20.0..20.0)).collect();
        let stations: Vec<Point<f64>> = (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let len = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
                let r = radius * rng.random_range(0.7..1.3) / len;
                for (x, c) in v.iter_mut().zip(&centre) {
                    *x = *x * r + c;
                }
                Point::new(v).unwrap()
            })
            .collect();
        let reference = Point::new((0..d).map(|k| centre[k] + rng.random_range(-3.0..3.0)).collect()).unwrap();
        let layout = Layout::new(stations, reference);
        if validate_layout(&layout).is_empty() {
            return layout;
        }
    }
}

/// Random convex combination of the stations.
pub fn point_in_hull<R: Rng>(rng: &mut R, layout: &Layout<f64>) -> Point<f64> {
    let w: Vec<f64> = (0..layout.len()).map(|_| -rng.random_range(1e-6f64..1.0).ln()).collect();
    let total: f64 = w.iter().sum();
    let mut c = vec![0.0; layout.dim()];
    for (s, wi) in layout.stations().iter().zip(&w) {
        for (ck, x) in c.iter_mut().zip(s.coords()) {
            *ck += wi / total * x;
        }
    }
    Point::new(c).unwrap()
}

pub fn max_abs_diff(a: &Point<f64>, b: &Point<f64>) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
