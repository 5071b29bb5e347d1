//! Online application (service provider).

use super::{check, Cx, Halt, Identity, Next, OrAbort};
use crate::eid::{Mandate, MOA_ID};
use crate::envelope::{Envelope, MsgType, SlotKind};
use crate::pre::re_decrypt;
use crate::scenario::UseCase;

const ATTRIBUTES: [&str; 3] = ["ssPIN", "name", "date_of_birth"];

/// Step 1 → 2: redirect to MOA-ID.
pub(super) fn access_request(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let login = env.meta_str("login").or_abort("1")?.to_owned();
    let sector = cx.sector();
    check(!sector.is_empty(), "1", "online application has no sector")?;
    cx.step("2");
    let reply = cx
        .envelope("2", MsgType::AuthRequest, MOA_ID)
        .plain("sector", sector)
        .meta("request_id", format!("{}-{}", cx.spec.id, cx.spec.sp))
        .meta("login", login);
    cx.send(reply)
}

/// Steps 7a–8, 16a–17 or 20–21: read the assertion and grant access.
pub(super) fn saml_response(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let (verify, decrypt, grant) = match cx.spec.use_case {
        UseCase::Austrian => ("7a", "7b", "8"),
        UseCase::Representation => ("16a", "16b", "17"),
        UseCase::Foreign => ("20", "20", "21"),
    };
    let mut names: Vec<&str> = ATTRIBUTES.to_vec();
    if cx.spec.use_case == UseCase::Representation {
        names.push("mandate");
    }
    let mut identity = Identity::new();
    if cx.cloud() {
        cx.step(decrypt);
        let sk = cx
            .ring()
            .re_identities
            .get(&cx.spec.sp)
            .cloned()
            .ok_or_else(|| Halt::abort(decrypt, "online application holds no identity key"))?;
        for name in &names {
            let c = env.re_ct(name).or_abort(verify)?;
            identity.insert((*name).to_owned(), re_decrypt(&sk, &c).or_abort(decrypt)?);
        }
    } else {
        for name in &names {
            let f = env
                .get(name)
                .filter(|f| f.kind == SlotKind::Plain)
                .ok_or_else(|| Halt::abort(verify, format!("missing {name}")))?;
            identity.insert((*name).to_owned(), f.bytes.clone());
        }
    }
    check(identity["ssPIN"].len() == 32, decrypt, "ssPIN has wrong length")?;
    if let Some(m) = identity.get("mandate") {
        Mandate::from_bytes(m).or_abort(decrypt)?;
    }
    cx.step(grant);
    Ok(Next::Done(super::FlowOutcome::Granted { identity }))
}
