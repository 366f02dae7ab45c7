//! Training-level properties of the curve-fitting benchmarks.

use qonn_core::model::{Qonn, QonnArchitecture};
use qonn_core::training::{curve_architecture, fit, make_dataset, CurveFunction, Dataset, DatasetKind, TrainConfig};

fn curve(function: CurveFunction, seed: u64) -> Dataset {
    let kind = DatasetKind::Curve { function, range: None, noise: None, train: 100, val: 50, test: 200 };
    make_dataset(&kind, seed).unwrap()
}

fn val_mse(arch: QonnArchitecture, data: &Dataset, seed: u64) -> f64 {
    let qonn = Qonn::new(arch).unwrap();
    let cfg = TrainConfig { seed, ..Default::default() };
    fit(&qonn, data, &cfg).unwrap().val_loss.unwrap()
}

#[test]
fn sincos_needs_the_nonlinearity() {
    let data = curve(CurveFunction::SinCos, 11);
    let gauss = val_mse(curve_architecture(0, 2).unwrap(), &data, 1);
    let qonn = val_mse(curve_architecture(2, 2).unwrap(), &data, 1);
    println!("sin(3x)+cos(5x): Gaussian {gauss:.4e}, 2 neurons {qonn:.4e}, ratio {:.2}", gauss / qonn);
    assert!(gauss >= 5.0 * qonn, "Gaussian {gauss:.4e} vs 2 neurons {qonn:.4e}");
}

#[test]
fn cosh_loss_does_not_grow_with_width() {
    let mut medians = Vec::new();
    for neurons in 1..=3 {
        let mut losses: Vec<f64> = (0..5)
            .map(|seed| {
                let data = curve(CurveFunction::Cosh, 100 + seed);
                val_mse(curve_architecture(neurons, neurons).unwrap(), &data, seed)
            })
            .collect();
        losses.sort_by(f64::total_cmp);
        medians.push(losses[2]);
    }
    println!("cosh median val MSE for 1, 2, 3 neurons: {medians:?}");
    assert!(medians[1] <= medians[0] && medians[2] <= medians[1], "{medians:?}");
}
