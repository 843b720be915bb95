use std::collections::HashMap;
use std::fs;
use std::io::ErrorKind;
use std::path::PathBuf;

use parking_lot::Mutex;

use super::atomic_write;
use crate::error::Error;
use crate::model::{validate_namespace, Pid};

/// Per-namespace counters in `registry/<namespace>.counter`, holding the
/// highest serial ever issued or observed. Serials are never handed out twice.
#[derive(Debug)]
pub struct PidRegistry {
    root: PathBuf,
    counters: Mutex<HashMap<String, u64>>,
}

impl PidRegistry {
    pub fn open(root: PathBuf) -> Result<Self, Error> {
        fs::create_dir_all(&root).map_err(|e| Error::storage(format!("create {}", root.display()), e))?;
        Ok(Self {
            root,
            counters: Mutex::new(HashMap::new()),
        })
    }

    fn path(&self, ns: &str) -> PathBuf {
        self.root.join(format!("{ns}.counter"))
    }

    fn load(&self, ns: &str) -> Result<u64, Error> {
        match fs::read_to_string(self.path(ns)) {
            Ok(s) => s.trim().parse().map_err(|_| {
                Error::storage(
                    format!("registry counter for {ns}"),
                    std::io::Error::new(ErrorKind::InvalidData, format!("unparseable counter {s:?}")),
                )
            }),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(0),
            Err(e) => Err(Error::storage(format!("read counter for {ns}"), e)),
        }
    }

    /// Issues the next serial in `ns`, skipping any for which `taken` is true.
    /// The counter is on disk before the PID is returned.
    pub fn mint(&self, ns: &str, taken: impl Fn(&Pid) -> bool) -> Result<Pid, Error> {
        validate_namespace(ns)?;
        let mut counters = self.counters.lock();
        let last = match counters.get(ns) {
            Some(v) => *v,
            None => self.load(ns)?,
        };
        let mut next = last + 1;
        let pid = loop {
            let pid = Pid::new(ns, next)?;
            if !taken(&pid) {
                break pid;
            }
            next += 1;
        };
        atomic_write(&self.path(ns), format!("{next}\n").as_bytes())?;
        counters.insert(ns.to_owned(), next);
        Ok(pid)
    }

    /// Records an externally chosen PID so minting never reissues it.
    pub fn observe(&self, pid: &Pid) -> Result<(), Error> {
        let ns = pid.namespace();
        let mut counters = self.counters.lock();
        let last = match counters.get(ns) {
            Some(v) => *v,
            None => self.load(ns)?,
        };
        if pid.serial() > last {
            atomic_write(&self.path(ns), format!("{}\n", pid.serial()).as_bytes())?;
            counters.insert(ns.to_owned(), pid.serial());
        } else {
            counters.insert(ns.to_owned(), last);
        }
        Ok(())
    }

    pub fn last_issued(&self, ns: &str) -> Result<u64, Error> {
        if let Some(v) = self.counters.lock().get(ns) {
            return Ok(*v);
        }
        self.load(ns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::sync::Arc;

    #[test]
    fn fresh_namespace_starts_at_one() {
        let dir = tempfile::tempdir().unwrap();
        let reg = PidRegistry::open(dir.path().to_path_buf()).unwrap();
        assert_eq!(reg.mint("demo", |_| false).unwrap().to_string(), "demo:1");
        assert_eq!(fs::read_to_string(dir.path().join("demo.counter")).unwrap().trim(), "1");
    }

    #[test]
    fn survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let first = PidRegistry::open(dir.path().to_path_buf()).unwrap().mint("demo", |_| false).unwrap();
        let second = PidRegistry::open(dir.path().to_path_buf()).unwrap().mint("demo", |_| false).unwrap();
        assert_eq!((first.to_string(), second.to_string()), ("demo:1".into(), "demo:2".into()));
    }

    #[test]
    fn observe_moves_counter_forward_only() {
        let dir = tempfile::tempdir().unwrap();
        let reg = PidRegistry::open(dir.path().to_path_buf()).unwrap();
        reg.observe(&"demo:7".parse().unwrap()).unwrap();
        reg.observe(&"demo:3".parse().unwrap()).unwrap();
        assert_eq!(reg.mint("demo", |_| false).unwrap().to_string(), "demo:8");
    }

    #[test]
    fn skips_taken_serials() {
        let dir = tempfile::tempdir().unwrap();
        let reg = PidRegistry::open(dir.path().to_path_buf()).unwrap();
        let pid = reg.mint("demo", |p| p.serial() < 3).unwrap();
        assert_eq!(pid.serial(), 3);
    }

    #[test]
    fn concurrent_mints_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let reg = Arc::new(PidRegistry::open(dir.path().to_path_buf()).unwrap());
        let threads: Vec<_> = (0..16)
            .map(|_| {
                let reg = Arc::clone(&reg);
                std::thread::spawn(move || (0..625).map(|_| reg.mint("demo", |_| false).unwrap()).collect::<Vec<_>>())
            })
            .collect();
        let all: Vec<Pid> = threads.into_iter().flat_map(|t| t.join().unwrap()).collect();
        let distinct: HashSet<_> = all.iter().collect();
        assert_eq!(all.len(), 10_000);
        assert_eq!(distinct.len(), 10_000);
        assert_eq!(reg.last_issued("demo").unwrap(), 10_000);
    }
}
