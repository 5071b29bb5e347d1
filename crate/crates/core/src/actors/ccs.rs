//! Citizen card software, for Austrian and foreign citizens.

use std::collections::BTreeSet;

use super::cr::mandate_tbs;
use super::{check, subject_is_resident, Cx, Flow, Halt, Next, OrAbort};
use crate::codec::Reader;
use crate::crypto::{dss_sign, dss_verify, hybrid_decrypt, SigKeyPair, Signature, SigningKey};
use crate::eid::{sspin_label, Mandate, ATTR_DOB, ATTR_NAME};
use crate::envelope::{Envelope, MsgType};
use crate::scenario::{Consent, UseCase};
use crate::world::CR;

fn consent(cx: &Cx<'_>) -> Consent {
    let s = &cx.world.scenario;
    s.citizens
        .iter()
        .find(|c| c.entry.id == cx.spec.subject)
        .map(|c| c.consent)
        .or_else(|| {
            s.foreign_citizens
                .iter()
                .find(|f| f.id == cx.spec.subject)
                .map(|f| f.consent)
        })
        .unwrap_or_default()
}

/// Key used for the citizen's signatures. A failing login signs with an
/// unrelated key.
fn signing_key(cx: &mut Cx<'_>) -> SigningKey {
    if consent(cx) == Consent::FailAuthentication {
        SigKeyPair::generate("unregistered", &mut *cx.rng).sk
    } else {
        cx.ring().signing.sk.clone()
    }
}

fn representation(cx: &Cx<'_>) -> bool {
    cx.spec.use_case == UseCase::Representation
}

pub(super) fn access_request(cx: &mut Cx<'_>) -> Result<Next, Halt> {
    cx.step("1");
    let login = match cx.spec.use_case {
        UseCase::Austrian => "citizen-card",
        UseCase::Representation => "representation",
        UseCase::Foreign => "stork",
    };
    let env = cx
        .envelope("1", MsgType::AccessRequest, &cx.spec.sp.clone())
        .meta("resource", "/protected")
        .meta("login", login);
    cx.send(env)
}

/// Steps 3b–3d (Austrian) or 3b–3c (representation).
pub(super) fn il_request(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let rep = representation(cx);
    let (consent_step, redact_step, reply_step) = if rep {
        ("3c", "3b", "3c")
    } else {
        ("3b", "3c", "3d")
    };
    check(subject_is_resident(cx), &env.step, "no citizen card")?;
    if consent(cx) == Consent::DenyIdentityLink {
        return Err(Halt::deny(consent_step, "citizen declined to release the Identity Link"));
    }
    if !rep {
        cx.step(consent_step);
    }
    let card = cx.ring().card.clone().ok_or_else(|| Halt::abort(&env.step, "no citizen card"))?;
    let reply = cx.envelope(reply_step, MsgType::IlResponse, &env.sender);
    let reply = if cx.cloud() {
        let sector = env.plain_str("sector").or_abort(&env.step)?;
        let mut keep: BTreeSet<String> =
            [sspin_label(sector), ATTR_NAME.to_owned(), ATTR_DOB.to_owned()].into();
        if rep {
            keep.insert(sspin_label(env.plain_str("register_sector").or_abort(&env.step)?));
        }
        cx.step(redact_step);
        let sra_pk = cx.world.sra_pk();
        let link = card
            .modified_link
            .as_ref()
            .ok_or_else(|| Halt::abort(redact_step, "card holds no modified Identity Link"))?
            .retain(&sra_pk, &keep)
            .or_abort(redact_step)?;
        let cert = card
            .pseudonymous_certificate
            .as_ref()
            .ok_or_else(|| Halt::abort(redact_step, "card holds no pseudonymous certificate"))?;
        super::put_link(reply, &link)?.plain("certificate", cert.to_bytes())
    } else {
        let il = card
            .identity_link
            .as_ref()
            .ok_or_else(|| Halt::abort(consent_step, "card holds no Identity Link"))?;
        reply
            .plain("identity_link", il.to_bytes())
            .plain("certificate", card.certificate.to_bytes())
    };
    cx.step(reply_step);
    cx.send(reply)
}

/// Steps 4b–4c: consent and signature over the consent text.
pub(super) fn sig_request(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let rep = representation(cx);
    let (consent_step, reply_step) = if rep { ("4", "4") } else { ("4b", "4c") };
    let text = env.meta_str("consent").or_abort(&env.step)?.to_owned();
    if consent(cx) == Consent::DenySignature {
        return Err(Halt::deny(consent_step, "citizen declined to sign"));
    }
    cx.step(consent_step);
    let sk = signing_key(cx);
    let sig = dss_sign(&sk, text.as_bytes());
    cx.step(reply_step);
    let reply = cx
        .envelope(reply_step, MsgType::SigResponse, &env.sender)
        .sig("signature", &sig);
    cx.send(reply)
}

fn parse_offer(bytes: &[u8]) -> Result<Vec<(Mandate, Signature)>, crate::codec::DecodeError> {
    let mut r = Reader::new(bytes);
    r.expect_tag(super::cr::OFFER_TAG)?;
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let m = Mandate::from_bytes(r.bytes()?)
            .map_err(|_| crate::codec::DecodeError::Invalid("mandate"))?;
        let id = r.str()?;
        let sig = Signature::from_bytes(r.bytes()?)
            .map_err(|_| crate::codec::DecodeError::Invalid("signature"))?;
        if id != m.mand_id {
            return Err(crate::codec::DecodeError::Invalid("mandate id"));
        }
        out.push((m, sig));
    }
    r.finish()?;
    Ok(out)
}

/// Steps 9a–9c: choose a mandate from the offered list.
pub(super) fn selection_page(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let offered: Vec<String> = if cx.cloud() {
        let step = "9b";
        let c = env.hybrid_ct("c_c").or_abort(step)?;
        let sk = cx
            .ring()
            .pke
            .as_ref()
            .ok_or_else(|| Halt::abort(step, "card has no decryption key"))?
            .sk
            .clone();
        let plain = hybrid_decrypt(&sk, &c).or_abort(step)?;
        let list = parse_offer(&plain).or_abort(step)?;
        let cr_pk = cx.pk(CR).ok_or_else(|| Halt::abort(step, "unknown CR"))?;
        for (m, sig) in &list {
            check(dss_verify(&cr_pk, &mandate_tbs(m), sig), step, "CR signature on mandate invalid")?;
        }
        list.into_iter().map(|(m, _)| m.mand_id).collect()
    } else {
        let n: usize = env
            .meta_str("mandates.count")
            .or_abort("9a")?
            .parse()
            .map_err(|_| Halt::abort("9a", "bad mandate count"))?;
        (1..=n.min(64))
            .map(|i| {
                let b = env.plain_bytes(&format!("mandate.{i}")).or_abort("9a")?;
                Ok(Mandate::from_bytes(b).or_abort("9a")?.mand_id)
            })
            .collect::<Result<_, Halt>>()?
    };
    check(!offered.is_empty(), "9a", "no mandate offered")?;
    let chosen = cx.spec.mandate.clone().unwrap_or_else(|| offered[0].clone());
    flow.ccs.offered = offered;
    cx.step("9c");
    let mut reply = cx
        .envelope("9c", MsgType::MandateSelection, &env.sender)
        .plain("mand_id", chosen.clone());
    if cx.cloud() {
        let sk = signing_key(cx);
        reply = reply.sig("sigma_c", &dss_sign(&sk, chosen.as_bytes()));
    }
    cx.send(reply)
}

/// Step 4 (foreign): the citizen names their home country.
pub(super) fn country_page(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let country = cx
        .world
        .registers
        .fidp
        .citizens
        .get(&cx.spec.subject)
        .map(|d| d.country.clone())
        .ok_or_else(|| Halt::abort("3", "subject is not a foreign citizen"))?;
    cx.step("4");
    let reply = cx
        .envelope("4", MsgType::CountrySelection, &env.sender)
        .plain("country", country);
    cx.send(reply)
}

/// Step 8 (foreign): qualified signature over the F-IdP's challenge.
pub(super) fn qs_request(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let challenge = env.meta_str("challenge").or_abort("7")?.to_owned();
    match consent(cx) {
        Consent::DenyIdentityLink | Consent::DenySignature => {
            return Err(Halt::deny("7", "citizen declined to authenticate"));
        }
        Consent::Approve | Consent::FailAuthentication => {}
    }
    let sk = signing_key(cx);
    let sig = dss_sign(&sk, challenge.as_bytes());
    let cert = cx
        .ring()
        .card
        .as_ref()
        .map(|c| c.certificate.to_bytes())
        .ok_or_else(|| Halt::abort("7", "no signature card"))?;
    cx.step("8");
    let reply = cx
        .envelope("8", MsgType::QsResponse, &env.sender)
        .sig("qualified_signature", &sig)
        .plain("certificate", cert);
    cx.send(reply)
}
