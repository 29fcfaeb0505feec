//! Borrowed views over observation sequences.

/// Row-major `T x D` block of feature vectors.
#[derive(Debug, Clone, Copy)]
pub struct Frames<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Frames<'a> {
    /// `data.len()` must be a multiple of `dim`.
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0, "frame dimension must be positive");
        assert_eq!(
            data.len() % dim,
            0,
            "frame data is not a whole number of rows"
        );
        Self { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, t: usize) -> &'a [f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }
}

/// An observation sequence: continuous feature vectors or discrete symbols.
#[derive(Debug, Clone, Copy)]
pub enum Observations<'a> {
    Frames(Frames<'a>),
    Symbols(&'a [usize]),
}

impl<'a> Observations<'a> {
    pub fn len(&self) -> usize {
        match self {
            Observations::Frames(f) => f.len(),
            Observations::Symbols(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<'a> From<Frames<'a>> for Observations<'a> {
    fn from(f: Frames<'a>) -> Self {
        Observations::Frames(f)
    }
}

impl<'a> From<&'a [usize]> for Observations<'a> {
    fn from(s: &'a [usize]) -> Self {
        Observations::Symbols(s)
    }
}

impl<'a> From<&'a Vec<usize>> for Observations<'a> {
    fn from(s: &'a Vec<usize>) -> Self {
        Observations::Symbols(s)
    }
}
