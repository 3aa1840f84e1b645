use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use crate::ingest::SourceModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no class has an eligible target")]
pub struct NoEligibleClass;

/// Picks one of `eligible`, favouring poorly covered classes.
///
/// Each class is weighted by `1 - lines_covered / lines_total` (0 for classes
/// without lines or unknown to the model). When every eligible class has
/// weight 0 the draw is uniform. Returns the position in `eligible`.
pub fn select_class<R: Rng + ?Sized>(
    model: &SourceModel,
    eligible: &[&str],
    rng: &mut R,
) -> Result<usize, NoEligibleClass> {
    if eligible.is_empty() {
        return Err(NoEligibleClass);
    }
    let weights: Vec<f64> = eligible
        .iter()
        .map(|name| {
            model
                .class(name)
                .and_then(|c| c.line_ratio())
                .map_or(0.0, |ratio| 1.0 - ratio)
        })
        .collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => Ok(dist.sample(rng)),
        // All weights zero: every candidate is fully line-covered.
        Err(_) => Ok(rng.gen_range(0..eligible.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{assemble_model, ClassCov, LineCov, LineRef, TestSnapshot};
    use crate::seed;

    fn class(name: &str, covered: u32, total: u32) -> ClassCov {
        let lines = (1..=total)
            .map(|n| LineCov {
                line_ref: LineRef {
                    file: format!("{name}.java"),
                    class_name: name.to_owned(),
                    line: n,
                },
                hits: u64::from(n <= covered),
                branch_total: 0,
                branch_covered: 0,
            })
            .collect();
        ClassCov::new(name.to_owned(), format!("{name}.java"), Vec::new(), lines)
    }

    #[test]
    fn empty_restriction() {
        let model = SourceModel::empty();
        assert_eq!(select_class(&model, &[], &mut seed::rng(1)), Err(NoEligibleClass));
    }

    #[test]
    fn single_class_always_chosen() {
        let model = assemble_model(vec![class("A", 3, 10)], vec![], TestSnapshot::default()).unwrap();
        let mut rng = seed::rng(3);
        for _ in 0..20 {
            assert_eq!(select_class(&model, &["A"], &mut rng), Ok(0));
        }
    }

    #[test]
    fn fully_covered_class_never_beats_uncovered_one() {
        let model = assemble_model(
            vec![class("Low", 0, 4), class("Full", 4, 4)],
            vec![],
            TestSnapshot::default(),
        )
        .unwrap();
        let mut rng = seed::rng(9);
        for _ in 0..200 {
            assert_eq!(select_class(&model, &["Low", "Full"], &mut rng), Ok(0));
        }
    }

    #[test]
    fn all_fully_covered_falls_back_to_uniform() {
        let model = assemble_model(
            vec![class("A", 5, 5), class("B", 2, 2)],
            vec![],
            TestSnapshot::default(),
        )
        .unwrap();
        let mut rng = seed::rng(11);
        let picks: Vec<usize> = (0..1000)
            .map(|_| select_class(&model, &["A", "B"], &mut rng).unwrap())
            .collect();
        let a = picks.iter().filter(|&&p| p == 0).count();
        assert!((400..600).contains(&a), "uniform fallback drew A {a} times");
    }
}
