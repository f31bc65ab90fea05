"""Two-stream 360-degree video saliency toolkit.

Subpackages/modules:
    kernels   - hot compute kernels (compiled extension with numpy fallback)
    tensor    - dense rank-4 tensors with reverse-mode autodiff
    weights   - named weight stores, ATSW binary format, Adam optimizer
    network   - layer specs, forward pass, parameter/receptive-field arithmetic
    attention - global attention stream (encoder / attention module / decoder)
    experts   - dual-expert cube-face stream with EMA recurrence and fusion
    losses    - composite training objective (KL + negative NSS + mask KL)
    geometry  - equirectangular/cubemap projections and spherical helpers
    dataset   - fixation parsing, rasterization, spherical blur, augmentation
    metrics   - AUC-Judd, NSS, CC, SIM, KLD and batch evaluation
    cli       - batch command-line front end
"""

__version__ = "0.1.0"
