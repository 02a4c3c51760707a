//! Fixtures shared by the benchmarks in `benches/`.

use gravnet::synth::{generate, SynthSpec};
use gravnet::{CrossSection, DesignMatrix, DyadPanel};

pub const YEAR: i32 = 2000;

/// One synthetic year with `n` countries and its full design matrix.
pub fn fixture(n: usize) -> (DyadPanel, CrossSection, DesignMatrix) {
    let spec = SynthSpec {
        n_countries: n,
        years: vec![YEAR],
        seed: 42,
        ..SynthSpec::default()
    };
    let (panel, _) = generate(&spec).expect("synthetic panel");
    let cs = panel.cross_section(YEAR).expect("cross-section");
    let dm = DesignMatrix::build(&cs, &panel, &Default::default(), false).expect("design");
    (panel, cs, dm)
}
