"""Regenerates the golden format fixtures with numpy."""
import numpy as np

H, W = 4, 8
i = np.arange(H * W)

rng = np.where(i % 5 == 0, -1.0, 0.25 * i + 0.5).astype("<f4").reshape(H, W)
np.save("range.npy", rng)
np.save("intensity.npy", (i / 32.0).astype("<f4").reshape(H, W))
np.save("semantic.npy", (i % 5).astype("<u2").reshape(H, W))
np.save("instance.npy", ((i % 3) * 1000 + i // W).astype("<u4").reshape(H, W))
np.save("deflection.npy", (i * 0.125).astype("<f4").reshape(H, W))

xyz = np.array(
    [[1, 0, 0], [0, 2, 0], [-3, 0, 0.5], [10.25, -4.5, 1.75], [0.1, 0.2, 0.3]], dtype="<f4"
)
intensity = np.array([0, 0.25, 0.5, 0.75, 1], dtype="<f4")
np.concatenate([xyz, intensity[:, None]], axis=1).astype("<f4").tofile("cloud.bin")

semantic = np.array([1, 2, 3, 4, 0], dtype="<u4")
instance = np.array([7, 0, 65535, 3, 1], dtype="<u4")
((instance << 16) | semantic).astype("<u4").tofile("labels.bin")
