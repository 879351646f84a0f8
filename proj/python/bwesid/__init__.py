"""Telephone-band speaker identification with statistical bandwidth extension."""

from ._bwesid import (
    BweModel,
    Channel,
    Error,
    Gmm,
    SpeakerModel,
    alaw_decode,
    alaw_decode_sample,
    alaw_encode,
    alaw_encode_sample,
    bwe_extend,
    bwe_train,
    cli,
    downsample2x,
    em_fit,
    enroll,
    extract_features,
    identify,
    lpc,
    lpc_to_cepstrum,
    make_variant,
    potsband_filter,
    read_wav,
    run_sweep,
    sphericity,
    synth_corpus,
    upsample2x,
    write_wav,
)

__version__ = "0.1.0"
