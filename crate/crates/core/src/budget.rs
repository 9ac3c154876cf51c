//! Parameter-budget planning: width schedules that match a single model to
//! the total parameter count of an N-round ensemble, for the three network
//! families, with the published tables embedded for verification.
//!
//! Width rounding is floor throughout: the published width/count pairs are
//! reproducible only under floor (e.g. 6 * sqrt(6) = 14.69 appears as 14).

use crate::error::{Error, Result};
use crate::nn::{cnn3_spec, mlp2_spec, vgg8_spec, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Cnn3,
    Mlp2,
    Vgg8,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Cnn3 => "cnn3",
            Family::Mlp2 => "mlp2",
            Family::Vgg8 => "vgg8",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "cnn3" => Ok(Family::Cnn3),
            "mlp2" => Ok(Family::Mlp2),
            "vgg8" => Ok(Family::Vgg8),
            other => Err(Error::InvalidArgument(format!("unknown family {other}"))),
        }
    }
}

/// A budget-matching request: the base architecture, the dataset geometry,
/// and the width-growth constant.
#[derive(Debug, Clone)]
pub struct BudgetRequest {
    pub family: Family,
    pub base_widths: Vec<usize>,
    pub input_shape: (usize, usize, usize),
    pub num_classes: usize,
    pub c_factor: f64,
    /// Whether parameter counts include bias terms. The published counts
    /// exclude biases for cnn3/mlp2 and include them for vgg8.
    pub include_bias: bool,
}

impl BudgetRequest {
    /// The published configuration of a family for a 32x32x3 input.
    pub fn standard(family: Family, num_classes: usize) -> Self {
        let (base_widths, c_factor, include_bias) = match (family, num_classes) {
            (Family::Cnn3, c) if c > 10 => (vec![6, 16, 32], 1.35, false),
            (Family::Cnn3, _) => (vec![6, 16, 32], 1.05, false),
            (Family::Mlp2, _) => (vec![128, 128], 1.0, false),
            (Family::Vgg8, c) if c > 10 => (vec![6, 16, 32, 64, 64], 1.70, true),
            (Family::Vgg8, _) => (vec![6, 16, 32, 64, 64], 1.48, true),
        };
        BudgetRequest {
            family,
            base_widths,
            input_shape: (32, 32, 3),
            num_classes,
            c_factor,
            include_bias,
        }
    }

    pub fn spec_for_widths(&self, widths: &[usize]) -> Result<NetworkSpec> {
        match self.family {
            Family::Cnn3 => cnn3_spec(
                [widths[0], widths[1], widths[2]],
                self.input_shape,
                self.num_classes,
                self.include_bias,
            ),
            Family::Mlp2 => mlp2_spec(
                [widths[0], widths[1]],
                self.input_shape,
                self.num_classes,
                self.include_bias,
            ),
            Family::Vgg8 => vgg8_spec(
                [widths[0], widths[1], widths[2], widths[3], widths[4]],
                self.input_shape,
                self.num_classes,
                self.include_bias,
                self.include_bias,
            ),
        }
    }

    pub fn base_params(&self) -> Result<usize> {
        Ok(self
            .spec_for_widths(&self.base_widths)?
            .param_count(self.include_bias))
    }

    /// Widths of the single model matched to an `n`-member ensemble.
    pub fn widths_for_multiplier(&self, n: usize) -> Result<Vec<usize>> {
        match self.family {
            Family::Cnn3 => Ok(cnn_widths_for_multiplier(
                [self.base_widths[0], self.base_widths[1], self.base_widths[2]],
                n,
                self.c_factor,
            )
            .to_vec()),
            Family::Vgg8 => Ok(vgg_widths_for_multiplier(
                [
                    self.base_widths[0],
                    self.base_widths[1],
                    self.base_widths[2],
                    self.base_widths[3],
                    self.base_widths[4],
                ],
                n,
                self.c_factor,
            )
            .to_vec()),
            Family::Mlp2 => {
                let budget = (self.base_params()? * n) as u64;
                let (h, w, c) = self.input_shape;
                let hidden = mlp_hidden_for_budget(budget, h * w * c, self.num_classes)?;
                Ok(vec![hidden, hidden])
            }
        }
    }
}

/// Largest hidden width n with n^2 + (d + C) n <= budget, i.e. the equal-
/// hidden-width two-layer MLP that fits the budget (bias-free counting).
pub fn mlp_hidden_for_budget(budget: u64, input_dim: usize, num_classes: usize) -> Result<usize> {
    let b = (input_dim + num_classes) as u128;
    let p = |n: u128| n * n + b * n;
    if (budget as u128) < p(1) {
        return Err(Error::BudgetTooSmall {
            budget,
            smallest: p(1) as u64,
        });
    }
    // float seed, then exact integer adjustment
    let bf = b as f64;
    let mut n = ((-bf + (bf * bf + 4.0 * budget as f64).sqrt()) / 2.0).floor() as u128;
    n = n.max(1);
    while p(n + 1) <= budget as u128 {
        n += 1;
    }
    while n > 1 && p(n) > budget as u128 {
        n -= 1;
    }
    Ok(n as usize)
}

/// Parameter count of the equal-width MLP: n^2 + (d + C) n.
pub fn mlp_params_for_hidden(hidden: usize, input_dim: usize, num_classes: usize) -> usize {
    hidden * hidden + (input_dim + num_classes) * hidden
}

/// Width schedule for the three-conv family.
///
/// For n <= 5 the first and third conv widths multiply by n (the
/// every-other-layer rule, which scales the parameter count by exactly n).
/// From n = 6 on, every width multiplies by sqrt(n), with the penultimate
/// factor boosted to c * sqrt(n); results are floored.
pub fn cnn_widths_for_multiplier(base: [usize; 3], n: usize, c: f64) -> [usize; 3] {
    if n <= 5 {
        [base[0] * n, base[1], base[2] * n]
    } else {
        let s = (n as f64).sqrt();
        [
            (base[0] as f64 * s).floor() as usize,
            (base[1] as f64 * s).floor() as usize,
            (base[2] as f64 * c * s).floor() as usize,
        ]
    }
}

/// Width schedule for the five-conv family: from n = 2 on, the first four
/// conv widths multiply by sqrt(n) and the fifth by c * sqrt(n), floored.
/// The two hidden fc widths stay at 128.
pub fn vgg_widths_for_multiplier(base: [usize; 5], n: usize, c: f64) -> [usize; 5] {
    if n <= 1 {
        return base;
    }
    let s = (n as f64).sqrt();
    [
        (base[0] as f64 * s).floor() as usize,
        (base[1] as f64 * s).floor() as usize,
        (base[2] as f64 * s).floor() as usize,
        (base[3] as f64 * s).floor() as usize,
        (base[4] as f64 * c * s).floor() as usize,
    ]
}

/// One table row: the ensemble budget at round `round` and the matched
/// single model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetRow {
    pub round: usize,
    pub ensemble_params: usize,
    pub single_widths: Vec<usize>,
    pub single_params: usize,
}

/// Reproduces the published table for a family: one row per ensemble size
/// 1..=rounds.
pub fn emit_budget_table(request: &BudgetRequest, rounds: usize) -> Result<Vec<BudgetRow>> {
    let base = request.base_params()?;
    let mut rows = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        let widths = request.widths_for_multiplier(t)?;
        let single_params = match request.family {
            Family::Mlp2 => {
                let (h, w, c) = request.input_shape;
                mlp_params_for_hidden(widths[0], h * w * c, request.num_classes)
            }
            _ => request.spec_for_widths(&widths)?.param_count(request.include_bias),
        };
        rows.push(BudgetRow {
            round: t,
            ensemble_params: base * t,
            single_widths: widths,
            single_params,
        });
    }
    Ok(rows)
}

/// Published width/count tables, embedded. Each entry is
/// (widths, single-model parameter count); the ensemble column is
/// base * round.
pub mod tables {
    pub const CNN3_C10: [([usize; 3], usize); 10] = [
        ([6, 16, 32], 5954),
        ([12, 16, 64], 11908),
        ([18, 16, 96], 17862),
        ([24, 16, 128], 23816),
        ([30, 16, 160], 29770),
        ([14, 39, 82], 34894),
        ([15, 42, 88], 40219),
        ([16, 45, 95], 46337),
        ([18, 48, 100], 52462),
        ([18, 50, 106], 57346),
    ];

    pub const CNN3_C100: [([usize; 3], usize); 10] = [
        ([6, 16, 32], 8834),
        ([12, 16, 64], 17668),
        ([18, 16, 96], 26502),
        ([24, 16, 128], 35336),
        ([30, 16, 160], 44170),
        ([14, 39, 105], 52647),
        ([15, 42, 114], 60567),
        ([16, 45, 122], 68522),
        ([18, 48, 129], 76890),
        ([18, 50, 136], 83386),
    ];

    pub const MLP2_C10: [([usize; 2], usize); 10] = [
        ([128, 128], 410_880),
        ([246, 246], 818_688),
        ([358, 358], 1_231_520),
        ([463, 463], 1_641_335),
        ([563, 563], 2_052_135),
        ([658, 658], 2_460_920),
        ([750, 750], 2_874_000),
        ([838, 838], 3_284_960),
        ([923, 923], 3_696_615),
        ([1005, 1005], 4_107_435),
    ];

    pub const MLP2_C100: [([usize; 2], usize); 10] = [
        ([128, 128], 422_400),
        ([247, 247], 844_493),
        ([358, 358], 1_263_740),
        ([464, 464], 1_687_104),
        ([565, 565], 2_111_405),
        ([661, 661], 2_533_613),
        ([753, 753], 2_955_525),
        ([841, 841], 3_374_933),
        ([927, 927], 3_799_773),
        ([1010, 1010], 4_223_820),
    ];

    pub const VGG8_C10: [([usize; 5], usize); 10] = [
        ([6, 16, 32, 64, 64], 87_234),
        ([8, 22, 45, 90, 133], 190_142),
        ([10, 27, 55, 110, 164], 272_163),
        ([12, 32, 64, 128, 189], 356_215),
        ([13, 35, 71, 143, 211], 435_156),
        ([14, 39, 78, 156, 232], 516_055),
        ([15, 42, 84, 169, 250], 596_331),
        ([16, 45, 90, 181, 267], 677_620),
        ([18, 48, 96, 192, 284], 761_294),
        ([18, 50, 101, 202, 299], 838_108),
    ];

    pub const VGG8_C100: [([usize; 5], usize); 10] = [
        ([6, 16, 32, 64, 64], 98_844),
        ([8, 22, 45, 90, 153], 220_532),
        ([10, 27, 55, 110, 188], 310_629),
        ([12, 32, 64, 128, 217], 403_693),
        ([13, 35, 71, 143, 243], 492_078),
        ([14, 39, 78, 156, 266], 579_787),
        ([15, 42, 84, 169, 287], 668_991),
        ([16, 45, 90, 181, 307], 759_550),
        ([18, 48, 96, 192, 326], 850_898),
        ([18, 50, 101, 202, 344], 937_333),
    ];
}

/// Compares every emitted table against the embedded published values.
/// Returns the list of mismatches; empty means exact reproduction.
pub fn verify_published_tables() -> Result<Vec<String>> {
    let mut mismatches = Vec::new();
    let mut check = |family: Family, classes: usize, expected: Vec<(Vec<usize>, usize)>| -> Result<()> {
        let request = BudgetRequest::standard(family, classes);
        let rows = emit_budget_table(&request, expected.len())?;
        for (row, (widths, params)) in rows.iter().zip(&expected) {
            if &row.single_widths != widths {
                mismatches.push(format!(
                    "{} C={} round {}: widths {:?}, published {:?}",
                    family.name(),
                    classes,
                    row.round,
                    row.single_widths,
                    widths
                ));
            }
            if row.single_params != *params {
                mismatches.push(format!(
                    "{} C={} round {}: {} params, published {}",
                    family.name(),
                    classes,
                    row.round,
                    row.single_params,
                    params
                ));
            }
        }
        Ok(())
    };
    check(Family::Cnn3, 10, tables::CNN3_C10.iter().map(|(w, p)| (w.to_vec(), *p)).collect())?;
    check(Family::Cnn3, 100, tables::CNN3_C100.iter().map(|(w, p)| (w.to_vec(), *p)).collect())?;
    check(Family::Mlp2, 10, tables::MLP2_C10.iter().map(|(w, p)| (w.to_vec(), *p)).collect())?;
    check(Family::Mlp2, 100, tables::MLP2_C100.iter().map(|(w, p)| (w.to_vec(), *p)).collect())?;
    check(Family::Vgg8, 10, tables::VGG8_C10.iter().map(|(w, p)| (w.to_vec(), *p)).collect())?;
    check(Family::Vgg8, 100, tables::VGG8_C100.iter().map(|(w, p)| (w.to_vec(), *p)).collect())?;
    Ok(mismatches)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_solver_hits_published_hidden_widths() {
        assert_eq!(mlp_hidden_for_budget(410_880, 3072, 10).unwrap(), 128);
        let n = mlp_hidden_for_budget(821_760, 3072, 10).unwrap();
        assert_eq!(n, 246);
        assert_eq!(mlp_params_for_hidden(n, 3072, 10), 818_688);
        let n = mlp_hidden_for_budget(844_800, 3072, 100).unwrap();
        assert_eq!(n, 247);
        assert_eq!(mlp_params_for_hidden(n, 3072, 100), 844_493);
    }

    #[test]
    fn mlp_solver_is_tight() {
        // p(n) <= N < p(n+1)
        for budget in [500_000u64, 1_000_000, 2_500_000, 4_108_800] {
            let n = mlp_hidden_for_budget(budget, 3072, 10).unwrap();
            assert!(mlp_params_for_hidden(n, 3072, 10) as u64 <= budget);
            assert!(mlp_params_for_hidden(n + 1, 3072, 10) as u64 > budget);
        }
        assert!(matches!(
            mlp_hidden_for_budget(100, 3072, 10),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn cnn_width_rule_examples() {
        assert_eq!(cnn_widths_for_multiplier([6, 16, 32], 1, 1.05), [6, 16, 32]);
        assert_eq!(cnn_widths_for_multiplier([6, 16, 32], 4, 1.05), [24, 16, 128]);
        assert_eq!(cnn_widths_for_multiplier([6, 16, 32], 6, 1.05), [14, 39, 82]);
    }

    #[test]
    fn vgg_width_rule_examples() {
        assert_eq!(
            vgg_widths_for_multiplier([6, 16, 32, 64, 64], 2, 1.48),
            [8, 22, 45, 90, 133]
        );
        assert_eq!(
            vgg_widths_for_multiplier([6, 16, 32, 64, 64], 1, 1.48),
            [6, 16, 32, 64, 64]
        );
        assert_eq!(
            vgg_widths_for_multiplier([6, 16, 32, 64, 64], 2, 1.70),
            [8, 22, 45, 90, 153]
        );
    }

    #[test]
    fn every_published_table_is_reproduced() {
        let mismatches = verify_published_tables().unwrap();
        assert!(mismatches.is_empty(), "{mismatches:#?}");
    }

    #[test]
    fn widths_and_counts_are_monotone_in_n() {
        for family in [Family::Cnn3, Family::Mlp2, Family::Vgg8] {
            let request = BudgetRequest::standard(family, 10);
            let rows = emit_budget_table(&request, 10).unwrap();
            for pair in rows.windows(2) {
                assert!(pair[1].single_params >= pair[0].single_params);
                assert!(pair[1].ensemble_params > pair[0].ensemble_params);
            }
        }
    }

    #[test]
    fn budget_feasibility_matches_published_behavior() {
        // cnn3/mlp2 single models never exceed the ensemble budget; vgg8
        // overshoots exactly where the published table does
        for family in [Family::Cnn3, Family::Mlp2] {
            for classes in [10, 100] {
                let rows = emit_budget_table(&BudgetRequest::standard(family, classes), 10).unwrap();
                for row in &rows {
                    assert!(
                        row.single_params <= row.ensemble_params,
                        "{} C={classes} round {}: {} > {}",
                        family.name(),
                        row.round,
                        row.single_params,
                        row.ensemble_params
                    );
                }
            }
        }
        let rows = emit_budget_table(&BudgetRequest::standard(Family::Vgg8, 10), 10).unwrap();
        let overshoot: Vec<usize> = rows
            .iter()
            .filter(|r| r.single_params > r.ensemble_params)
            .map(|r| r.round)
            .collect();
        assert_eq!(overshoot, vec![2, 3, 4], "published overshoot rounds");
    }
}
