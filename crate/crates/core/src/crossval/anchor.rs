use crate::model::ClimateTable;

fn lower_median_order(values: &[f64]) -> (Vec<usize>, usize) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let pos = (values.len() - 1) / 2;
    (idx, pos)
}

/// Anchor site for the importance sampler.
///
/// In 1-D this is the site at the lower median order statistic. In 2-D it is
/// the site nearest (Euclidean, in per-column standard-deviation units) to the
/// coordinatewise lower medians; ties go to the smaller index.
pub fn select_anchor(climate: &ClimateTable) -> usize {
    let n = climate.n_sites();
    if n < 2 {
        return 0;
    }
    if climate.dim() == 1 {
        let col = climate.column(0);
        let (idx, pos) = lower_median_order(&col);
        return idx[pos];
    }
    let mut target = Vec::new();
    let mut scale = Vec::new();
    for d in 0..climate.dim() {
        let col = climate.column(d);
        let (idx, pos) = lower_median_order(&col);
        target.push(col[idx[pos]]);
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        scale.push(if sd > 0.0 { sd } else { 1.0 });
    }
    let dist = |i: usize| -> f64 {
        climate.point(i).iter().zip(&target).zip(&scale).map(|((x, t), s)| ((x - t) / s).powi(2)).sum()
    };
    (0..n).min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b))).expect("n >= 2")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_and_even_medians() {
        let c = ClimateTable::from_column(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(select_anchor(&c), 1);
        let c = ClimateTable::from_column(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(select_anchor(&c), 3);
    }

    #[test]
    fn bivariate_medoid() {
        let v = vec![0.0, 0.0, 10.0, 10.0, 5.0, 4.0, 6.0, 6.0, 1.0, 9.0];
        let c = ClimateTable::new(5, 2, v).unwrap();
        assert_eq!(select_anchor(&c), 3);
    }
}
