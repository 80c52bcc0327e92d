//! Exhaustive single-character edits of a string: every deletion, every
//! substitution and every insertion drawn from an alphabet.

pub const JSON_ALPHABET: &[char] = &[
    '{', '}', '[', ']', '"', '\'', ':', ',', ' ', '\t', '\n', '\\', '0', '1', 'e', 'E', 'a', 'A', 'n', 'N', 'u', 'l',
    'o', 'O', 'V', 'I', 'S', 'C', 'T', 'x', '-', '+', '.', '/', 'ی', '\u{0}',
];

/// Mutations of `s`, deduplicated, excluding `s` itself, in a fixed order.
pub fn single_char_mutations(s: &str, alphabet: &[char]) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    seen.insert(s.to_string());
    let mut emit = |v: Vec<char>| {
        let m: String = v.into_iter().collect();
        if seen.insert(m.clone()) {
            out.push(m);
        }
    };
    for i in 0..=chars.len() {
        if i < chars.len() {
            let mut v = chars.clone();
            v.remove(i);
            emit(v);
        }
        for &c in alphabet {
            if i < chars.len() {
                let mut v = chars.clone();
                v[i] = c;
                emit(v);
            }
            let mut v = chars.clone();
            v.insert(i, c);
            emit(v);
        }
    }
    out
}
