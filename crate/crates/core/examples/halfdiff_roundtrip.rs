//! Maps a few direction pairs to half/difference angles and back.

use nalgebra::Vector3;
use triplane::btf_data::DirectionPair;
use triplane::halfdiff::{from_half_diff, halfdiff_to_plane_uv, to_half_diff};

fn dir(theta_deg: f64, phi_deg: f64) -> Vector3<f64> {
    let (t, p) = (theta_deg.to_radians(), phi_deg.to_radians());
    Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
}

fn main() -> triplane::Result<()> {
    let pairs = [((0.0, 0.0), (0.0, 0.0)), ((30.0, 0.0), (30.0, 180.0)), ((60.0, 45.0), (20.0, 300.0)), ((75.0, 10.0), (75.0, 20.0))];
    for ((ti, pi), (to, po)) in pairs {
        let pair = DirectionPair::new(dir(ti, pi), dir(to, po))?;
        let hd = to_half_diff(&pair)?;
        let back = from_half_diff(&hd)?;
        let uv = halfdiff_to_plane_uv(&hd);
        let err = (back.wi() - pair.wi()).norm().max((back.wo() - pair.wo()).norm());
        println!(
            "wi ({ti:>4},{pi:>4}) wo ({to:>4},{po:>4})  h ({:6.2},{:6.2}) d ({:6.2},{:6.2})  uv_h [{:.3},{:.3}] uv_d [{:.3},{:.3}]  round trip {err:.1e}",
            hd.theta_h.to_degrees(),
            hd.phi_h.to_degrees(),
            hd.theta_d.to_degrees(),
            hd.phi_d.to_degrees(),
            uv.h[0], uv.h[1], uv.d[0], uv.d[1],
        );
    }
    Ok(())
}
