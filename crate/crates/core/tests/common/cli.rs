use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

/// A small but complete run: 12 verbs so N=10 trials fit, one short epoch.
pub const SMALL_CONFIG: &str = r#"{
  "synth": {"n_verbs": 12, "n_nouns": 16, "n_scenes": 4, "n_train": 400, "n_bench": 120, "feature_dim": 16},
  "model": {"dim": 8, "rank": 4, "alpha": 4.0},
  "train": {"epochs": 1, "batch_size": 32},
  "mining": {"k": 10},
  "paths": {"data_dir": "data", "out_dir": "runs/default"}
}
"#;

/// A scratch directory holding `config.json`; commands run inside it with relative paths,
/// so two workspaces given the same commands produce byte-identical trees.
pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("config.json"), config).unwrap();
        Workspace { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn cmd(&self, args: &[&str]) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_hoi"));
        c.current_dir(self.dir.path()).arg("--config").arg("config.json").args(args);
        c.env("RUST_LOG", "warn").env_remove("HOI_LLM_ENDPOINT");
        c
    }

    pub fn run(&self, args: &[&str]) -> Output {
        self.cmd(args).output().unwrap()
    }

    /// Run and require success, showing stderr otherwise.
    pub fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "hoi {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    pub fn read(&self, rel: &str) -> Vec<u8> {
        std::fs::read(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    pub fn json(&self, rel: &str) -> serde_json::Value {
        serde_json::from_slice(&self.read(rel)).unwrap()
    }

    /// Corpus, bundles for both splits and trials.
    pub fn prepare(&self) {
        self.ok(&["synth"]);
        self.ok(&["mine", "--split", "train"]);
        self.ok(&["mine", "--split", "bench"]);
        self.ok(&["bench"]);
    }

    /// Train `objective` into `runs/<objective>` and evaluate it there.
    pub fn train_eval(&self, objective: &str, extra: &[&str]) -> PathBuf {
        let out = format!("runs/{objective}");
        let mut args = vec!["train", "--objective", objective, "--out", &out];
        args.extend_from_slice(extra);
        self.ok(&args);
        let ckpt = format!("{out}/model.ckpt");
        self.ok(&["eval", "--checkpoint", &ckpt, "--out", &out, "--histogram"]);
        self.path(&out)
    }
}

/// Every file under `root` with its contents, sorted by relative path.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
