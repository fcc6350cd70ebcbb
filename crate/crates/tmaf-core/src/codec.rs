//! Binary model serialization.
//!
//! A saved model is one byte string: a header describing the architecture
//! (format version, block dimensions, batch-norm settings, activation kinds
//! with their breakpoint grids), then every trainable parameter as a 64-bit
//! little-endian float in [`Network::collect_params`] order, then the
//! running statistics of each batch-norm layer. Round-tripping a network
//! through bytes is bit-exact, and a reader must consume the entire string.

use crate::activations::ActivationOp;
use crate::la::{LaError, Matrix};
use crate::network::{AffineLayer, BatchNormLayer, Block, NetError, Network};
use crate::stepfn::{StepFnError, StepFunction};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub const MAGIC: [u8; 4] = *b"TMAF";
pub const VERSION: u32 = 1;

const TAG_NONE: u8 = 0;
const TAG_RELU: u8 = 1;
const TAG_LEAKY: u8 = 2;
const TAG_PRELU: u8 = 3;
const TAG_DIAG: u8 = 4;
const TAG_TRIDIAG: u8 = 5;

/// Decoding failure.
#[derive(Clone, Debug, PartialEq)]
pub enum CodecError {
    /// The file does not start with the model magic.
    BadMagic,
    /// The format version is not supported by this reader.
    UnsupportedVersion { version: u32 },
    /// The byte string ended before the structure was complete.
    Truncated,
    /// The structure was complete but `extra` bytes remained.
    TrailingBytes { extra: usize },
    /// Unknown activation tag.
    BadTag { tag: u8 },
    /// A decoded field violates a structural constraint.
    Invalid { what: &'static str },
    /// Decoded values failed network validation.
    Net(NetError),
    /// Decoded values failed step-function validation.
    Step(StepFnError),
    /// Decoded values failed matrix validation.
    La(LaError),
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecError::BadMagic => write!(f, "not a model file: bad magic"),
            CodecError::UnsupportedVersion { version } => {
                write!(f, "unsupported model format version {version}")
            }
            CodecError::Truncated => write!(f, "model file is truncated"),
            CodecError::TrailingBytes { extra } => {
                write!(f, "model file has {extra} trailing bytes")
            }
            CodecError::BadTag { tag } => write!(f, "unknown activation tag {tag}"),
            CodecError::Invalid { what } => write!(f, "invalid model field: {what}"),
            CodecError::Net(e) => write!(f, "decoded network invalid: {e}"),
            CodecError::Step(e) => write!(f, "decoded step function invalid: {e}"),
            CodecError::La(e) => write!(f, "decoded parameters invalid: {e}"),
        }
    }
}

impl core::error::Error for CodecError {}

impl From<NetError> for CodecError {
    fn from(e: NetError) -> CodecError {
        CodecError::Net(e)
    }
}

impl From<StepFnError> for CodecError {
    fn from(e: StepFnError) -> CodecError {
        CodecError::Step(e)
    }
}

impl From<LaError> for CodecError {
    fn from(e: LaError) -> CodecError {
        CodecError::La(e)
    }
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_step_group(out: &mut Vec<u8>, fns: &[StepFunction]) {
    push_u32(out, fns.len() as u32);
    for f in fns {
        push_u32(out, f.breakpoints().len() as u32);
        for &b in f.breakpoints() {
            push_f64(out, b);
        }
    }
}

/// Architecture descriptor alone: everything except parameter values and
/// running statistics. Two networks are architecturally interchangeable
/// exactly when their headers are byte-identical.
pub fn header_bytes(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    push_u32(&mut out, VERSION);
    push_u32(&mut out, net.blocks().len() as u32);
    for block in net.blocks() {
        push_u32(&mut out, block.affine().in_dim() as u32);
        push_u32(&mut out, block.affine().out_dim() as u32);
        match block.bn() {
            Some(bn) => {
                out.push(1);
                push_f64(&mut out, bn.eps());
                push_f64(&mut out, bn.momentum());
            }
            None => out.push(0),
        }
        match block.act() {
            None => out.push(TAG_NONE),
            Some(ActivationOp::ReLU) => out.push(TAG_RELU),
            Some(ActivationOp::LeakyReLU { slope }) => {
                out.push(TAG_LEAKY);
                push_f64(&mut out, *slope);
            }
            Some(ActivationOp::PReLU { .. }) => out.push(TAG_PRELU),
            Some(ActivationOp::DiagTMAF { alpha }) => {
                out.push(TAG_DIAG);
                push_step_group(&mut out, alpha);
            }
            Some(ActivationOp::TriDiagTMAF { alpha, beta, gamma }) => {
                out.push(TAG_TRIDIAG);
                push_step_group(&mut out, alpha);
                push_step_group(&mut out, beta);
                push_step_group(&mut out, gamma);
            }
        }
    }
    out
}

/// Full serialization: header, parameters, running statistics.
pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut out = header_bytes(net);
    for v in net.param_values() {
        push_f64(&mut out, v);
    }
    for block in net.blocks() {
        if let Some(bn) = block.bn() {
            for &v in bn.running_mean() {
                push_f64(&mut out, v);
            }
            for &v in bn.running_var() {
                push_f64(&mut out, v);
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.bytes.len() {
            return Err(CodecError::Truncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn take_u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take_f64(&mut self) -> Result<f64, CodecError> {
        let b = self.take(8)?;
        let mut buf = [0u8; 8];
        buf.copy_from_slice(b);
        Ok(f64::from_le_bytes(buf))
    }

    fn take_f64s(&mut self, count: usize) -> Result<Vec<f64>, CodecError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.take_f64()?);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<(), CodecError> {
        if self.pos != self.bytes.len() {
            return Err(CodecError::TrailingBytes {
                extra: self.bytes.len() - self.pos,
            });
        }
        Ok(())
    }
}

enum ActDesc {
    None,
    ReLU,
    Leaky { slope: f64 },
    PReLU,
    Diag { groups: Vec<Vec<f64>> },
    TriDiag { groups: [Vec<Vec<f64>>; 3] },
}

struct BlockDesc {
    in_dim: usize,
    out_dim: usize,
    bn: Option<(f64, f64)>,
    act: ActDesc,
}

fn read_step_group(c: &mut Cursor<'_>, width: usize) -> Result<Vec<Vec<f64>>, CodecError> {
    let n_fns = c.take_u32()? as usize;
    if n_fns != 1 && n_fns != width {
        return Err(CodecError::Invalid {
            what: "step function count must be 1 or the layer width",
        });
    }
    let mut fns = Vec::with_capacity(n_fns);
    for _ in 0..n_fns {
        let n_bps = c.take_u32()? as usize;
        if n_bps == 0 {
            return Err(CodecError::Invalid {
                what: "step function needs at least one breakpoint",
            });
        }
        fns.push(c.take_f64s(n_bps)?);
    }
    Ok(fns)
}

fn step_functions(
    groups: Vec<Vec<f64>>,
    c: &mut Cursor<'_>,
) -> Result<Vec<StepFunction>, CodecError> {
    let mut fns = Vec::with_capacity(groups.len());
    for breakpoints in groups {
        let values = c.take_f64s(breakpoints.len() + 1)?;
        fns.push(StepFunction::new(breakpoints, values)?);
    }
    Ok(fns)
}

/// Decodes a model produced by [`to_bytes`], validating every structural
/// and numeric invariant and rejecting both truncated and oversized input.
pub fn from_bytes(bytes: &[u8]) -> Result<Network, CodecError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = c.take_u32()?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion { version });
    }
    let n_blocks = c.take_u32()? as usize;
    if n_blocks == 0 {
        return Err(CodecError::Net(NetError::EmptyNetwork));
    }

    let mut descs = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let in_dim = c.take_u32()? as usize;
        let out_dim = c.take_u32()? as usize;
        if in_dim == 0 || out_dim == 0 {
            return Err(CodecError::Invalid {
                what: "layer dimensions must be positive",
            });
        }
        let bn = match c.take_u8()? {
            0 => None,
            1 => Some((c.take_f64()?, c.take_f64()?)),
            _ => {
                return Err(CodecError::Invalid {
                    what: "batch norm flag must be 0 or 1",
                })
            }
        };
        let act = match c.take_u8()? {
            TAG_NONE => ActDesc::None,
            TAG_RELU => ActDesc::ReLU,
            TAG_LEAKY => {
                let slope = c.take_f64()?;
                if !slope.is_finite() {
                    return Err(CodecError::Invalid {
                        what: "leaky slope must be finite",
                    });
                }
                ActDesc::Leaky { slope }
            }
            TAG_PRELU => ActDesc::PReLU,
            TAG_DIAG => ActDesc::Diag {
                groups: read_step_group(&mut c, out_dim)?,
            },
            TAG_TRIDIAG => ActDesc::TriDiag {
                groups: [
                    read_step_group(&mut c, out_dim)?,
                    read_step_group(&mut c, out_dim)?,
                    read_step_group(&mut c, out_dim)?,
                ],
            },
            tag => return Err(CodecError::BadTag { tag }),
        };
        descs.push(BlockDesc {
            in_dim,
            out_dim,
            bn,
            act,
        });
    }

    // Parameter section, in the same order collect_params exposes slots.
    struct Pending {
        affine: AffineLayer,
        bn: Option<(Vec<f64>, Vec<f64>, f64, f64)>,
        act: Option<ActivationOp>,
    }
    let mut pending = Vec::with_capacity(n_blocks);
    for desc in descs {
        let w = Matrix::from_vec(
            desc.out_dim,
            desc.in_dim,
            c.take_f64s(desc.out_dim * desc.in_dim)?,
        )?;
        let b = c.take_f64s(desc.out_dim)?;
        let affine = AffineLayer::new(w, b)?;
        let bn = match desc.bn {
            Some((eps, momentum)) => {
                let scale = c.take_f64s(desc.out_dim)?;
                let shift = c.take_f64s(desc.out_dim)?;
                Some((scale, shift, eps, momentum))
            }
            None => None,
        };
        let act = match desc.act {
            ActDesc::None => None,
            ActDesc::ReLU => Some(ActivationOp::relu()),
            ActDesc::Leaky { slope } => Some(ActivationOp::leaky_relu(slope)),
            ActDesc::PReLU => {
                let slopes = c.take_f64s(desc.out_dim)?;
                if slopes.iter().any(|s| !s.is_finite()) {
                    return Err(CodecError::Invalid {
                        what: "slopes must be finite",
                    });
                }
                Some(ActivationOp::PReLU {
                    slope_grads: vec![0.0; slopes.len()],
                    slopes,
                })
            }
            ActDesc::Diag { groups } => Some(ActivationOp::DiagTMAF {
                alpha: step_functions(groups, &mut c)?,
            }),
            ActDesc::TriDiag { groups } => {
                let [a, b, g] = groups;
                Some(ActivationOp::TriDiagTMAF {
                    alpha: step_functions(a, &mut c)?,
                    beta: step_functions(b, &mut c)?,
                    gamma: step_functions(g, &mut c)?,
                })
            }
        };
        pending.push(Pending { affine, bn, act });
    }

    // Running-statistics section.
    let mut blocks = Vec::with_capacity(n_blocks);
    for p in &mut pending {
        let bn = match p.bn.take() {
            Some((scale, shift, eps, momentum)) => {
                let dim = scale.len();
                let mean = c.take_f64s(dim)?;
                let var = c.take_f64s(dim)?;
                Some(BatchNormLayer::from_parts(
                    scale, shift, mean, var, eps, momentum,
                )?)
            }
            None => None,
        };
        blocks.push((bn, p.act.take()));
    }
    c.finish()?;

    let blocks = pending
        .into_iter()
        .zip(blocks)
        .map(|(p, (bn, act))| Block::new(p.affine, bn, act))
        .collect();
    Ok(Network::new(blocks)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{ActivationSpec, Sharing};
    use crate::data::{sample_sine_dataset, SeededRng, Targets};
    use crate::la::Batch;
    use crate::network::Mode;
    use crate::optim::{mse_loss, Adam};
    use crate::stepfn::gaussian_decile_breakpoints;

    fn trained_net(spec: &ActivationSpec, batch_norm: bool, seed: u64) -> Network {
        let mut rng = SeededRng::new(seed);
        let ds = sample_sine_dataset(2, 16, &mut rng).unwrap();
        let mut net = Network::mlp(&[2, 5, 4, 1], spec, batch_norm, &mut rng).unwrap();
        let mut adam = Adam::new(net.param_count(), 1e-2);
        for _ in 0..5 {
            net.zero_grads();
            let (out, tape) = net.forward(ds.inputs(), Mode::Train).unwrap();
            let target = match ds.targets() {
                Targets::Values(t) => t,
                _ => unreachable!(),
            };
            let (_, grad) = mse_loss(&out, target).unwrap();
            net.backward(tape, &grad).unwrap();
            adam.step(&mut net.collect_params()).unwrap();
        }
        net
    }

    fn all_specs() -> Vec<(ActivationSpec, bool)> {
        vec![
            (ActivationSpec::ReLU, true),
            (ActivationSpec::LeakyReLU { slope: 0.01 }, false),
            (ActivationSpec::PReLU, true),
            (
                ActivationSpec::DiagTMAF {
                    breakpoints: gaussian_decile_breakpoints(),
                    sharing: Sharing::PerLayer,
                },
                true,
            ),
            (
                ActivationSpec::DiagTMAF {
                    breakpoints: vec![-0.5, 0.0, 0.5],
                    sharing: Sharing::PerNeuron,
                },
                false,
            ),
            (
                ActivationSpec::TriDiagTMAF {
                    alpha: gaussian_decile_breakpoints(),
                    beta: vec![-1.0, 0.0],
                    gamma: vec![0.0, 1.0],
                    sharing: Sharing::PerLayer,
                },
                true,
            ),
        ]
    }

    #[test]
    fn round_trip_is_bit_exact_for_every_kind() {
        for (i, (spec, bn)) in all_specs().into_iter().enumerate() {
            let net = trained_net(&spec, bn, 100 + i as u64);
            let bytes = to_bytes(&net);
            let restored = from_bytes(&bytes).unwrap();
            let original = net.param_values();
            let recovered = restored.param_values();
            assert_eq!(original.len(), recovered.len());
            for (a, b) in original.iter().zip(&recovered) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            assert_eq!(to_bytes(&restored), bytes, "spec {i} re-encode differs");

            let mut rng = SeededRng::new(999);
            let data = (0..10).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let x = Batch::from_vec(5, 2, data).unwrap();
            let a = net.forward_eval(&x).unwrap();
            let b = restored.forward_eval(&x).unwrap();
            for (u, v) in a.data().iter().zip(b.data()) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn header_matches_architecture_not_values() {
        let spec = ActivationSpec::DiagTMAF {
            breakpoints: gaussian_decile_breakpoints(),
            sharing: Sharing::PerLayer,
        };
        let a = trained_net(&spec, true, 1);
        let b = trained_net(&spec, true, 2);
        assert_eq!(header_bytes(&a), header_bytes(&b));
        let c = trained_net(&ActivationSpec::ReLU, true, 1);
        assert_ne!(header_bytes(&a), header_bytes(&c));
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let net = trained_net(&ActivationSpec::ReLU, false, 3);
        let mut bytes = to_bytes(&net);
        bytes[0] = b'X';
        assert_eq!(from_bytes(&bytes), Err(CodecError::BadMagic));
        let mut bytes = to_bytes(&net);
        bytes[4] = 9;
        assert_eq!(
            from_bytes(&bytes),
            Err(CodecError::UnsupportedVersion { version: 9 })
        );
    }

    #[test]
    fn rejects_truncation_anywhere() {
        let net = trained_net(&ActivationSpec::PReLU, true, 4);
        let bytes = to_bytes(&net);
        for cut in [3, 11, 20, bytes.len() / 2, bytes.len() - 1] {
            assert_eq!(
                from_bytes(&bytes[..cut]),
                Err(CodecError::Truncated),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn rejects_trailing_bytes() {
        let net = trained_net(&ActivationSpec::ReLU, false, 5);
        let mut bytes = to_bytes(&net);
        bytes.extend_from_slice(&[0, 0, 0]);
        assert_eq!(
            from_bytes(&bytes),
            Err(CodecError::TrailingBytes { extra: 3 })
        );
    }

    #[test]
    fn rejects_unknown_activation_tag() {
        let net = trained_net(&ActivationSpec::ReLU, false, 6);
        let bytes = to_bytes(&net);
        // Header: magic(4) version(4) n_blocks(4), block 0: dims(8), bn
        // flag(1), act tag at offset 21.
        let mut bad = bytes.clone();
        assert_eq!(bad[21], TAG_RELU);
        bad[21] = 77;
        assert_eq!(from_bytes(&bad), Err(CodecError::BadTag { tag: 77 }));
    }

    #[test]
    fn rejects_non_finite_parameters() {
        let net = trained_net(&ActivationSpec::ReLU, false, 7);
        let bytes = to_bytes(&net);
        let header_len = header_bytes(&net).len();
        let mut bad = bytes.clone();
        bad[header_len..header_len + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            from_bytes(&bad),
            Err(CodecError::La(LaError::NonFinite { .. }))
        ));
    }

    #[test]
    fn rejects_decreasing_breakpoints() {
        let spec = ActivationSpec::DiagTMAF {
            breakpoints: vec![-1.0, 1.0],
            sharing: Sharing::PerLayer,
        };
        let net = trained_net(&spec, false, 8);
        let bytes = to_bytes(&net);
        // Find the two breakpoint floats by scanning for their exact bytes.
        let needle: Vec<u8> = (-1.0f64)
            .to_le_bytes()
            .iter()
            .chain(1.0f64.to_le_bytes().iter())
            .copied()
            .collect();
        let at = bytes
            .windows(16)
            .position(|w| w == needle.as_slice())
            .unwrap();
        let mut bad = bytes.clone();
        bad[at..at + 8].copy_from_slice(&2.0f64.to_le_bytes());
        assert!(matches!(from_bytes(&bad), Err(CodecError::Step(_))));
    }
}
