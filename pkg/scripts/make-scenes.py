from pathlib import Path

from app.depth_aug.pgm import write_pgm
from app.geometry import CameraIntrinsics
from app.simworld.scenes import corrupt_like_sensor, render_tabletop_scene

INTRINSICS = CameraIntrinsics(300.0, 300.0, 160.0, 160.0)


def make_scenes(app, count=4, size=320):
    """Writes clean tabletop depth frames and their sensor-corrupted twins."""
    with app.app_context():
        out = Path(app.config["OUTPUT_DIR"]) / "scenes"
        out.mkdir(parents=True, exist_ok=True)
        seed = app.config["DEFAULT_SEED"]

        for i in range(count):
            clean = render_tabletop_scene(INTRINSICS, size, seed=seed + i)
            write_pgm(clean, out / f"scene{i:02d}_clean.pgm")
            real = corrupt_like_sensor(clean, seed=seed + 1000 + i)
            write_pgm(real, out / f"scene{i:02d}_real.pgm")

        print(f"Wrote {count} clean/real depth pairs to {out}")
        print(f"Try: flask depth {out / 'scene00_clean.pgm'} --mode sim")


if __name__ == "__main__":
    from app import create_app

    app = create_app("default")
    make_scenes(app)
