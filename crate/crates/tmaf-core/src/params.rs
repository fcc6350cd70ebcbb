//! Flat (value, gradient) slot access shared by the optimizer, the gradient
//! checker, and the model serializer.

/// Which kind of trainable scalar a slot holds. Gradient-check reports are
/// grouped by this.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamClass {
    Weight,
    Bias,
    BnScale,
    BnShift,
    PReluSlope,
    AlphaValue,
    BetaValue,
    GammaValue,
}

impl ParamClass {
    pub fn name(self) -> &'static str {
        match self {
            ParamClass::Weight => "weight",
            ParamClass::Bias => "bias",
            ParamClass::BnScale => "bn_scale",
            ParamClass::BnShift => "bn_shift",
            ParamClass::PReluSlope => "prelu_slope",
            ParamClass::AlphaValue => "alpha_value",
            ParamClass::BetaValue => "beta_value",
            ParamClass::GammaValue => "gamma_value",
        }
    }
}

/// One trainable scalar and its gradient accumulator.
pub struct ParamSlot<'a> {
    pub class: ParamClass,
    pub value: &'a mut f64,
    pub grad: &'a mut f64,
}
