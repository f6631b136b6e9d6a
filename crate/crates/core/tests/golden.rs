//! Regression snapshots of seeded outputs. Regenerate with
//! `UPDATE_GOLDEN=1 cargo test -p newtonop --test golden` after an
//! intentional change to the RNG, field recipes or initialization.

use std::path::PathBuf;

use newtonop::datagen::random_polynomial_field;
use newtonop::grid::Grid;
use newtonop::neural::{grid_coords, ArchConfig, DeepONet};
use newtonop::rng::Rng;

fn check(name: &str, values: &[f64]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let text: String = values.iter().map(|v| format!("{v:.17e}\n")).collect();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
        return;
    }
    let stored = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let stored: Vec<f64> = stored.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(stored.len(), values.len(), "{name}: length changed");
    for (i, (a, b)) in stored.iter().zip(values).enumerate() {
        assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()), "{name}[{i}]: stored {a} now {b}");
    }
}

#[test]
fn polynomial_field_seed_42() {
    let grid = Grid::line(100);
    let f = random_polynomial_field(&mut Rng::seed_from_u64(42), 3, 1.0, &grid).unwrap();
    check("polynomial_seed42.txt", f.values());
}

#[test]
fn default_deeponet_output_seed_7() {
    let grid = Grid::line(20);
    let net = DeepONet::with_mlp_trunk(20, 1, 1, &ArchConfig::default(), &mut Rng::seed_from_u64(7)).unwrap();
    let sensors = ndarray::Array2::from_shape_fn((2, 20), |(i, j)| ((i + 1) as f64 * 0.3 * j as f64).sin());
    let out = net.predict(sensors.view(), grid_coords(&grid).view()).unwrap();
    check("deeponet_seed7.txt", out.as_slice().unwrap());
}
