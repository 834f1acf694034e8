use std::collections::{HashMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::text::tokens;

pub const MIN_TOKEN_LEN: usize = 3;

/// Common English function words.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "could", "did", "didn", "do", "does", "doesn", "doing", "don",
    "down", "during", "each", "either", "etc", "few", "for", "from", "further", "had", "has",
    "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "however", "i", "if", "in", "into", "is", "isn", "it", "its", "itself", "just", "may",
    "me", "might", "more", "most", "must", "my", "myself", "neither", "no", "nor", "not", "now",
    "of", "off", "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out",
    "over", "own", "per", "same", "shall", "she", "should", "so", "some", "such", "than", "that",
    "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
    "those", "through", "thus", "to", "too", "under", "until", "up", "upon", "us", "very", "via",
    "was", "wasn", "we", "were", "weren", "what", "when", "where", "whereas", "whether", "which",
    "while", "who", "whom", "whose", "why", "will", "with", "within", "without", "would", "yet",
    "you", "your", "yours", "yourself", "yourselves",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCount {
    pub token: String,
    pub count: usize,
}

/// Token counts sorted by descending count, then ascending token.
pub fn word_frequencies<S: AsRef<str>>(texts: &[S], extra_stopwords: &[String]) -> Vec<WordCount> {
    let extra: HashSet<String> = extra_stopwords.iter().map(|w| w.to_lowercase()).collect();
    let builtin: HashSet<&str> = ENGLISH_STOPWORDS.iter().copied().collect();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for tok in tokens(text.as_ref()) {
            if tok.chars().count() < MIN_TOKEN_LEN || builtin.contains(tok.as_str()) || extra.contains(&tok) {
                continue;
            }
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut out: Vec<WordCount> = counts
        .into_iter()
        .map(|(token, count)| WordCount { token, count })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.token.cmp(&b.token)));
    out
}

/// 1-based rank of `token`, if present.
pub fn rank_of(freqs: &[WordCount], token: &str) -> Option<usize> {
    freqs.iter().position(|w| w.token == token).map(|i| i + 1)
}

pub fn write_frequency_csv<W: Write>(freqs: &[WordCount], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["token", "count"])?;
    for f in freqs {
        w.write_record([f.token.as_str(), &f.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        assert!(word_frequencies::<&str>(&[], &[]).is_empty());
    }

    #[test]
    fn case_folding() {
        let f = word_frequencies(&["Dopamine dopamine motor"], &[]);
        assert_eq!(
            f,
            vec![
                WordCount { token: "dopamine".into(), count: 2 },
                WordCount { token: "motor".into(), count: 1 },
            ]
        );
    }

    #[test]
    fn stopwords_and_short_tokens_dropped() {
        let f = word_frequencies(&["The neurons of the striatum in v1"], &["striatum".to_string()]);
        assert_eq!(f, vec![WordCount { token: "neurons".into(), count: 1 }]);
    }

    #[test]
    fn csv_output() {
        let mut buf = Vec::new();
        write_frequency_csv(&word_frequencies(&["motor motor gaba"], &[]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "token,count\nmotor,2\ngaba,1\n");
    }
}
