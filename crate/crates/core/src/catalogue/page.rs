use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LIMIT: usize = 100;
pub const MAX_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Self {
            offset: 0,
            limit: DEFAULT_LIMIT,
        }
    }
}

impl Page {
    pub fn new(offset: Option<usize>, limit: Option<usize>) -> Result<Self> {
        let limit = limit.unwrap_or(DEFAULT_LIMIT);
        if limit == 0 || limit > MAX_LIMIT {
            return Err(Error::invalid(
                "limit",
                format!("must be between 1 and {MAX_LIMIT}"),
            ));
        }
        Ok(Self {
            offset: offset.unwrap_or(0),
            limit,
        })
    }
}

/// One page of a sorted result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listing<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: Option<usize>,
}

impl<T> Listing<T> {
    /// Cuts `items` down to `page`; `None` returns everything.
    pub fn paginate(items: Vec<T>, page: Option<Page>) -> Self {
        let total = items.len();
        match page {
            None => Self {
                items,
                total,
                offset: 0,
                limit: None,
            },
            Some(p) => Self {
                items: items.into_iter().skip(p.offset).take(p.limit).collect(),
                total,
                offset: p.offset,
                limit: Some(p.limit),
            },
        }
    }

    pub fn map<U>(self, f: impl FnMut(T) -> U) -> Listing<U> {
        Listing {
            items: self.items.into_iter().map(f).collect(),
            total: self.total,
            offset: self.offset,
            limit: self.limit,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_bounds() {
        assert_eq!(Page::new(None, None).unwrap(), Page { offset: 0, limit: 100 });
        assert!(Page::new(None, Some(1000)).is_ok());
        assert!(Page::new(None, Some(1001)).is_err());
        assert!(Page::new(None, Some(0)).is_err());
    }

    #[test]
    fn paginate_reports_total() {
        let l = Listing::paginate((0..10).collect(), Some(Page { offset: 8, limit: 5 }));
        assert_eq!(l.items, vec![8, 9]);
        assert_eq!(l.total, 10);
        let all = Listing::paginate((0..10).collect::<Vec<_>>(), None);
        assert_eq!(all.items.len(), 10);
    }
}
