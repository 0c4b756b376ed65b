use levyito::charfn::Characteristics;
use levyito::decomp::{analyze, Synthesizer};
use levyito::linalg::SquareMatrix;
use levyito::measure::{Atom, AtomicMeasure, LevyMeasureSpec};
use levyito::space::BanachDisk;

#[test]
fn readme_example() -> Result<(), levyito::Error> {
    let disk = BanachDisk::unit(2)?;
    let nu = LevyMeasureSpec::Atomic(AtomicMeasure::new(
        2,
        vec![Atom { point: vec![0.4, 0.0], mass: 1.0 }],
    )?);
    let q = SquareMatrix::from_rows(&[vec![0.2, 0.0], vec![0.0, 0.1]])?;
    let chars = Characteristics::new(vec![0.1, -0.2], q, nu, disk)?;

    let grid: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
    let syn = Synthesizer::new(chars.clone(), grid, 4)?;
    let bundle = syn.synthesize(7, 0)?; // (seed, replica)

    // recover the components from the path alone
    let dec = analyze(&bundle.x, chars.nu(), chars.disk(), 4)?;
    assert_eq!(dec.large, bundle.l);
    assert_eq!(dec.small_compensated, bundle.j);
    Ok(())
}
