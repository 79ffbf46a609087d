use std::collections::BTreeSet;

/// |a ∩ b| / |a ∪ b|, with two empty sets scoring 0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// URL tokens: split on non-alphanumerics, lowercase, drop tokens shorter
/// than two characters, the scheme, and `www`.
pub fn url_tokens(url: &str) -> BTreeSet<String> {
    url.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|t| !matches!(t.as_str(), "http" | "https" | "www"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(jaccard(&set(&["paris", "weather"]), &set(&["paris", "weather"])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn url_tokenization() {
        assert_eq!(url_tokens("https://www.Meteo-France.com/paris/a?q=1"), set(&["meteo", "france", "com", "paris"]));
    }

    proptest! {
        #[test]
        fn symmetric_and_one_iff_equal(
            a in proptest::collection::btree_set(0u8..12, 0..8),
            b in proptest::collection::btree_set(0u8..12, 0..8),
        ) {
            let ab = jaccard(&a, &b);
            prop_assert_eq!(ab, jaccard(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 1.0, a == b && !a.is_empty());
        }
    }
}
