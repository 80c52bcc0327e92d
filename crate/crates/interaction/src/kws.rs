//! Text-level wake-phrase gate applied to transcripts.

pub const DEFAULT_WAKE_PHRASES: [&str; 2] = ["Hello, PISHYAR", "PISHYAR, my friend"];

/// Lowercases and collapses every whitespace run to a single space.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exact substring match after normalization. Blank phrases never match.
pub fn kws_match<S: AsRef<str>>(transcript: &str, phrases: &[S]) -> bool {
    let t = normalize(transcript);
    phrases.iter().any(|p| {
        let p = normalize(p.as_ref());
        !p.is_empty() && t.contains(&p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wake_phrases() {
        assert!(kws_match("hello, pishyar", &DEFAULT_WAKE_PHRASES));
        assert!(!kws_match("hello world", &DEFAULT_WAKE_PHRASES));
        assert!(kws_match("  PISHYAR,   my friend  ", &DEFAULT_WAKE_PHRASES));
        assert!(!kws_match("hello pishyar", &DEFAULT_WAKE_PHRASES));
        assert!(!kws_match("anything", &[""]));
    }
}
