use bragg_core::broadening::calibrate_light_shift_ratio;
use bragg_core::lattice::LatticeConfig;

fn main() {
    let gamma = std::f64::consts::TAU * 1.3e6;
    let eta =
        calibrate_light_shift_ratio(&LatticeConfig::experiment(), gamma, 10.0 * gamma, 20_000, 0)
            .unwrap();
    println!("{eta:.6}");
}
