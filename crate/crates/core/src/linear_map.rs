//! Real-linear maps between self-adjoint parts, stored by their images of
//! the orthonormal Hermitian basis and extended complex-linearly.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{AlgebraElement, BlockAlgebra};
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    source: BlockAlgebra,
    target: BlockAlgebra,
    images: Vec<AlgebraElement>,
}

impl LinearMap {
    /// `images[i]` is the image of `source.hermitian_basis()[i]`.
    pub fn new(source: &BlockAlgebra, target: &BlockAlgebra, images: Vec<AlgebraElement>) -> Result<Self> {
        if images.len() != source.complex_dim() {
            return Err(invalid(format!(
                "expected {} basis images, got {}",
                source.complex_dim(),
                images.len()
            )));
        }
        for x in &images {
            target.ensure_same(x.algebra())?;
        }
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            images,
        })
    }

    /// Tabulate `f` on the Hermitian basis of `source`.
    pub fn from_fn(
        source: &BlockAlgebra,
        target: &BlockAlgebra,
        mut f: impl FnMut(&AlgebraElement) -> AlgebraElement,
    ) -> Result<Self> {
        let images = source.hermitian_basis().iter().map(&mut f).collect();
        Self::new(source, target, images)
    }

    pub fn identity(algebra: &BlockAlgebra) -> Self {
        Self {
            source: algebra.clone(),
            target: algebra.clone(),
            images: algebra.hermitian_basis(),
        }
    }

    pub fn source(&self) -> &BlockAlgebra {
        &self.source
    }

    pub fn target(&self) -> &BlockAlgebra {
        &self.target
    }

    pub fn images(&self) -> &[AlgebraElement] {
        &self.images
    }

    fn apply_self_adjoint(&self, x: &AlgebraElement) -> AlgebraElement {
        let coords = self.source.hermitian_coords(x);
        coords.iter().zip(&self.images).fold(
            self.target.zero(),
            |acc, (&c, img)| if c == 0.0 { acc } else { &acc + &img.scale(c) },
        )
    }

    /// Complex-linear extension: `L(x) = L(Re x) + i·L(Im x)`.
    pub fn apply(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.source.ensure_same(x.algebra())?;
        let re = self.apply_self_adjoint(&x.real_part());
        let im = x.imag_part();
        if im
            .blocks()
            .iter()
            .all(|b| b.iter().all(|z| *z == Complex64::new(0.0, 0.0)))
        {
            return Ok(re);
        }
        Ok(&re + &self.apply_self_adjoint(&im).scale_complex(Complex64::new(0.0, 1.0)))
    }

    /// Real matrix in Hermitian-basis coordinates (images are projected to
    /// their Hermitian parts).
    pub fn matrix(&self) -> DMatrix<f64> {
        let rows = self.target.complex_dim();
        let cols = self.source.complex_dim();
        let mut m = DMatrix::zeros(rows, cols);
        for (j, img) in self.images.iter().enumerate() {
            for (i, c) in self.target.hermitian_coords(img).into_iter().enumerate() {
                m[(i, j)] = c;
            }
        }
        m
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let m = self.matrix();
        if m.is_empty() {
            return Vec::new();
        }
        m.svd(false, false).singular_values.iter().copied().collect()
    }

    /// Inverse map, or `None` when the coordinate matrix is not square or its
    /// smallest singular value is below `tol`.
    pub fn inverse(&self, tol: f64) -> Option<LinearMap> {
        let m = self.matrix();
        if !m.is_square() {
            return None;
        }
        let smallest = self.singular_values().into_iter().fold(f64::INFINITY, f64::min);
        if smallest.is_nan() || smallest <= tol {
            return None;
        }
        let inv = m.try_inverse()?;
        let images = (0..inv.ncols())
            .map(|j| {
                let col: Vec<f64> = inv.column(j).iter().copied().collect();
                self.source.from_hermitian_coords(&col)
            })
            .collect();
        Some(LinearMap {
            source: self.target.clone(),
            target: self.source.clone(),
            images,
        })
    }
}
