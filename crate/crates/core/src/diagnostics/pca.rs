use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// `rows x components`, row-major.
    pub scores: Vec<f64>,
    pub components: usize,
    /// Principal directions, one `width`-vector per component.
    pub loadings: Vec<Vec<f64>>,
    /// Variance captured by each kept component.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
    pub mean: Vec<f64>,
}

/// Eigenvalues below this fraction of the largest are treated as null.
const NULL_DIRECTION: f64 = 1e-12;

/// Scores of row-major `samples` on their top `components` principal
/// directions. Each direction's largest-magnitude loading is made positive.
pub fn pca_project(samples: &[f64], width: usize, components: usize) -> Result<PcaProjection> {
    if width < 2 || samples.len() % width != 0 || samples.len() / width < 2 {
        return Err(Error::InvalidArgument(
            "need at least two samples of at least two dimensions".into(),
        ));
    }
    if components == 0 || components > width {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {components} of {width} components"
        )));
    }
    let rows = samples.len() / width;
    let data = DMatrix::from_row_slice(rows, width, samples);
    let mean: Vec<f64> = (0..width).map(|j| data.column(j).mean()).collect();
    let mut centred = data;
    for j in 0..width {
        centred.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let cov = centred.transpose() * &centred / (rows as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut loadings = Vec::with_capacity(components);
    let mut explained = Vec::with_capacity(components);
    for &idx in order.iter().take(components) {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = (0..width)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap();
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let lambda = eig.eigenvalues[idx].max(0.0);
        explained.push(lambda);
        loadings.push(v);
    }

    let mut scores = vec![0.0; rows * components];
    for r in 0..rows {
        for (c, v) in loadings.iter().enumerate() {
            if explained[c] <= NULL_DIRECTION * top {
                continue;
            }
            scores[r * components + c] = (0..width).map(|j| centred[(r, j)] * v[j]).sum();
        }
    }
    Ok(PcaProjection {
        scores,
        components,
        loadings,
        explained_variance: explained,
        total_variance: eig.eigenvalues.iter().map(|l| l.max(0.0)).sum(),
        mean,
    })
}
