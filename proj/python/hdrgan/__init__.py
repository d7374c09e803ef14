"""Single-image HDR reconstruction: tonemapping, LDR synthesis, masks, training and inference."""

from ._hdrgan import (
    ArgumentError,
    ConfigError,
    DataError,
    DivergenceError,
    DomainError,
    Error,
    FormatError,
    Generator,
    IoError,
    NumericError,
    default_train_config,
    dilate_mask,
    load_hdr,
    load_ldr,
    lr_at,
    make_toy_scene,
    mu_inverse,
    mu_tonemap,
    psnr,
    save_hdr,
    save_ldr,
    ssim,
    synthesize_ldr,
    threshold_mask,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
