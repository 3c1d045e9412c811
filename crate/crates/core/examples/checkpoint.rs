//! Saves a network in the binary checkpoint format and restores it bit for bit.

use etcrl::ddpg::actor_spec;
use etcrl::nn::{checkpoint, Mlp};
use etcrl::rng;

fn main() -> etcrl::Result<()> {
    let actor = Mlp::new(actor_spec(3, 1, &[64, 64], 2.0), &mut rng::stream(0, "checkpoint-example", 0))?;
    let dir = std::env::temp_dir().join("etcrl-checkpoint-example");
    let path = dir.join("actor.ckpt");
    checkpoint::save(&actor, &path)?;
    let restored = checkpoint::load(&path)?;
    let bytes = std::fs::metadata(&path).map_err(|e| etcrl::Error::Io { path: path.clone(), source: e })?.len();
    println!("{} parameters, {bytes} bytes at {}", actor.parameter_count(), path.display());
    println!("identical after reload: {}", restored == actor);
    let s = [0.05, -0.1, 0.3];
    println!("output before {:?}, after {:?}", actor.predict_one(&s)?, restored.predict_one(&s)?);
    Ok(())
}
