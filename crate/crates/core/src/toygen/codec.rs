//! Causal two-frame latent codec.
//!
//! Token 1 is frame 1 verbatim; every later token averages its frame with the
//! preceding one. A token taken from the middle of a stream therefore carries
//! different statistics than a position-1 token.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Token(pub Vec<f64>);

impl Token {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("cannot encode an empty frame sequence")]
    Empty,
    #[error("frame {index} has dimensionality {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
}

fn check_dims<'a, I: IntoIterator<Item = &'a [f64]>>(items: I) -> Result<(), CodecError> {
    let mut expected = None;
    for (index, v) in items.into_iter().enumerate() {
        match expected {
            None => expected = Some(v.len()),
            Some(e) if e != v.len() => {
                return Err(CodecError::DimensionMismatch { index, expected: e, found: v.len() })
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn encode_codec<F: AsRef<[f64]>>(frames: &[F]) -> Result<Vec<Token>, CodecError> {
    if frames.is_empty() {
        return Err(CodecError::Empty);
    }
    check_dims(frames.iter().map(|f| f.as_ref()))?;
    let mut tokens = Vec::with_capacity(frames.len());
    tokens.push(Token(frames[0].as_ref().to_vec()));
    for pair in frames.windows(2) {
        let (prev, cur) = (pair[0].as_ref(), pair[1].as_ref());
        tokens.push(Token(cur.iter().zip(prev).map(|(c, p)| 0.5 * (c + p)).collect()));
    }
    Ok(tokens)
}

/// Exact inverse of [`encode_codec`] on contiguous input. An empty token list
/// decodes to no frames.
pub fn decode_codec(tokens: &[Token]) -> Result<Vec<Vec<f64>>, CodecError> {
    check_dims(tokens.iter().map(|t| t.values()))?;
    let mut frames: Vec<Vec<f64>> = Vec::with_capacity(tokens.len());
    for token in tokens {
        let frame = match frames.last() {
            None => token.0.clone(),
            Some(prev) => token.0.iter().zip(prev).map(|(t, p)| 2.0 * t - p).collect(),
        };
        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn constant_sequence_tokens_equal_constant() {
        let frames = vec![vec![1.5, -2.0]; 5];
        for t in encode_codec(&frames).unwrap() {
            assert_eq!(t.0, vec![1.5, -2.0]);
        }
    }

    #[test]
    fn scalar_examples() {
        let tokens = encode_codec(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(tokens, vec![Token(vec![0.0]), Token(vec![1.0])]);
        assert_eq!(decode_codec(&tokens).unwrap(), vec![vec![0.0], vec![2.0]]);
    }

    #[test]
    fn empty_input() {
        assert_eq!(encode_codec::<Vec<f64>>(&[]), Err(CodecError::Empty));
        assert_eq!(decode_codec(&[]).unwrap(), Vec::<Vec<f64>>::new());
    }

    #[test]
    fn mismatched_dims() {
        assert_eq!(
            encode_codec(&[vec![0.0], vec![1.0, 2.0]]),
            Err(CodecError::DimensionMismatch { index: 1, expected: 1, found: 2 })
        );
    }

    #[test]
    fn mid_sequence_token_spliced_to_front_is_off_by_half_motion() {
        // f(t) = t sampled on a contiguous stream: a mid-sequence token is the
        // average of its frame and the one before it.
        let frames: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64]).collect();
        let tokens = encode_codec(&frames).unwrap();
        for t in 1..frames.len() {
            let spliced = decode_codec(&tokens[t..=t]).unwrap();
            let motion = frames[t][0] - frames[t - 1][0];
            assert_eq!((frames[t][0] - spliced[0][0]).abs(), 0.5 * motion.abs());
            assert_eq!((frames[t][0] - spliced[0][0]).abs(), 0.5);
        }
    }

    proptest! {
        #[test]
        fn round_trip_identity(frames in prop::collection::vec(prop::collection::vec(-8i32..8, 3), 1..12)) {
            // dyadic values keep the halving and doubling exact
            let frames: Vec<Vec<f64>> = frames.into_iter()
                .map(|f| f.into_iter().map(|v| v as f64 * 0.25).collect())
                .collect();
            let back = decode_codec(&encode_codec(&frames).unwrap()).unwrap();
            prop_assert_eq!(back, frames);
        }

        #[test]
        fn round_trip_close_on_reals(frames in prop::collection::vec(prop::collection::vec(-1.0e3f64..1.0e3, 2), 1..20)) {
            let back = decode_codec(&encode_codec(&frames).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&frames) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
                }
            }
        }
    }
}
