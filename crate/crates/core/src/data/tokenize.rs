/// Lowercases `text` and splits it on every run of non-alphanumeric
/// characters, dropping empty fragments.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|s| !s.is_empty()).map(str::to_lowercase).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_on_punctuation() {
        assert_eq!(tokenize("Blue Garden-Chair, 2pcs"), vec!["blue", "garden", "chair", "2pcs"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize(" -- ,, ").is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn idempotent_on_ascii(text in "[ -~]{0,40}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(&once, &twice);
            for tok in &once {
                prop_assert!(tok.chars().all(|c| c.is_ascii_alphanumeric() && !c.is_ascii_uppercase()));
            }
        }
    }
}
