use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Page sizes offered by the portal.
pub const PAGE_SIZES: [usize; 2] = [20, 90];
pub const DEFAULT_PAGE_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageWindow {
    pub offset: usize,
    pub limit: usize,
    pub total_pages: usize,
}

/// Window arithmetic for one page. A page past the end is not an error; it
/// selects nothing.
pub fn paginate(total_items: usize, page_size: usize, page: usize) -> Result<PageWindow> {
    if !PAGE_SIZES.contains(&page_size) {
        return Err(Error::Validation(format!(
            "page_size must be one of {PAGE_SIZES:?}, got {page_size}"
        )));
    }
    if page == 0 {
        return Err(Error::Validation("page numbers start at 1".into()));
    }
    Ok(PageWindow {
        offset: (page - 1).saturating_mul(page_size),
        limit: page_size,
        total_pages: total_items.div_ceil(page_size),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageEnvelope<T> {
    pub items: Vec<T>,
    pub page: usize,
    pub page_size: usize,
    pub total_items: usize,
    pub total_pages: usize,
}

impl<T> PageEnvelope<T> {
    /// Slices `all` (already in display order) for the requested page.
    pub fn from_vec(all: Vec<T>, page_size: usize, page: usize) -> Result<Self> {
        let total_items = all.len();
        let w = paginate(total_items, page_size, page)?;
        let items = all.into_iter().skip(w.offset).take(w.limit).collect();
        Ok(Self {
            items,
            page,
            page_size,
            total_items,
            total_pages: w.total_pages,
        })
    }

    pub fn map<U>(self, f: impl FnMut(T) -> U) -> PageEnvelope<U> {
        PageEnvelope {
            items: self.items.into_iter().map(f).collect(),
            page: self.page,
            page_size: self.page_size,
            total_items: self.total_items,
            total_pages: self.total_pages,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_pages() {
        assert_eq!(paginate(21_275, 20, 1).unwrap().total_pages, 1064);
    }

    #[test]
    fn empty_total() {
        let w = paginate(0, 20, 1).unwrap();
        assert_eq!(w.total_pages, 0);
        let env = PageEnvelope::<u8>::from_vec(vec![], 20, 1).unwrap();
        assert!(env.items.is_empty());
    }

    #[test]
    fn bad_arguments() {
        assert!(paginate(10, 25, 1).is_err());
        assert!(paginate(10, 20, 0).is_err());
    }

    #[test]
    fn beyond_last_page_is_empty() {
        let env = PageEnvelope::from_vec((0..45).collect::<Vec<_>>(), 20, 9).unwrap();
        assert!(env.items.is_empty());
        assert_eq!(env.total_pages, 3);
        assert_eq!(env.total_items, 45);
    }
}
