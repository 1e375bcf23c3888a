use crate::error::{Error, Result};

/// Batch of feature maps, `N x H x W x K`, row-major with channels last.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub data: Vec<f32>,
}

impl Tensor4 {
    pub fn zeros(n: usize, h: usize, w: usize, k: usize) -> Self {
        Self {
            n,
            h,
            w,
            k,
            data: vec![0.0; n * h * w * k],
        }
    }

    pub fn from_vec(n: usize, h: usize, w: usize, k: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n * h * w * k {
            return Err(Error::mismatch(
                format!("{n}x{h}x{w}x{k} = {} values", n * h * w * k),
                data.len(),
            ));
        }
        Ok(Self { n, h, w, k, data })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.h, self.w, self.k)
    }

    /// Number of spatial positions across the batch.
    pub fn positions(&self) -> usize {
        self.n * self.h * self.w
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, n: usize, y: usize, x: usize, c: usize) -> f32 {
        self.data[((n * self.h + y) * self.w + x) * self.k + c]
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("{what}[{i}] = {}", self.data[i]))),
            None => Ok(()),
        }
    }

    pub(crate) fn same_shape(&self, other: &Tensor4) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::mismatch(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }
}
