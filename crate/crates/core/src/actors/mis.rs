//! Mandate Issuing Service (cloud-hosted).

use super::cr::mandate_tbs;
use super::{check, forward, Cx, Flow, Halt, Next, OrAbort};
use crate::codec::Writer;
use crate::crypto::{dss_sign, dss_verify};
use crate::eid::{derive_sspin, Certificate, IdentityLink, Mandate, MOA_ID};
use crate::envelope::{Envelope, MsgType, SlotKind};
use crate::harness::Visibility;
use crate::world::CR;

/// Bytes the MIS signs for an electronic mandate.
pub(crate) fn e_mandate_tbs(mandate: &[u8], mand_id: &str) -> Vec<u8> {
    let mut w = Writer::with_tag(b"eid-cloud/e-mandate/v1");
    w.bytes(mandate).str(mand_id);
    w.finish()
}

/// Steps 7a / 7b–8a.
pub(super) fn mandate_query(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let reply = cx.envelope("8a", MsgType::RegisterQuery, CR);
    let reply = if cx.cloud() {
        let step = "7b";
        let c = env.re_ct("c_mis").or_abort(step)?;
        let c_cr = forward(cx, CR, &c, step)?;
        reply.re("c_cr", &c_cr)
    } else {
        let step = "7a";
        let il_bytes = env.plain_bytes("identity_link").or_abort(step)?.to_vec();
        let cert_bytes = env.plain_bytes("certificate").or_abort(step)?.to_vec();
        let sector = env.plain_str("sector").or_abort(step)?.to_owned();
        let sra_pk = cx.world.sra_pk();
        let il = IdentityLink::from_bytes(&il_bytes).or_abort(step)?;
        check(il.verify(&sra_pk), step, "Identity Link signature invalid")?;
        let cert = Certificate::from_bytes(&cert_bytes).or_abort(step)?;
        check(cert.verify(&sra_pk), step, "certificate invalid")?;
        let source_pin = il
            .source_pin(&cx.spec.subject)
            .ok_or_else(|| Halt::abort(step, "Identity Link lacks a sourcePIN"))?;
        cx.observe("source_pin", Visibility::Plaintext, source_pin.as_bytes());
        let cr_sector = cx.world.registers.cr.sector.clone();
        let pin = derive_sspin(&source_pin, &cr_sector).or_abort(step)?;
        cx.observe("ssPIN", Visibility::Plaintext, pin.value());
        flow.mis.sector = sector;
        flow.mis.il = il_bytes;
        flow.mis.cert = cert_bytes;
        reply.plain("sspin", pin.value().to_vec())
    };
    cx.step("8a");
    cx.send(reply)
}

/// Steps 8c–9a.
pub(super) fn register_response(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "8c";
    let subject = cx.spec.subject.clone();
    let mut reply = cx.envelope("9a", MsgType::SelectionPage, &subject);
    if cx.cloud() {
        let result = env.meta_str("result").or_abort(step)?;
        if result == "none" {
            cx.step("9a");
            return Err(Halt::deny("9a", "no mandate registered for the citizen"));
        }
        let c = env.get("c_c").filter(|f| f.kind == SlotKind::Hybrid);
        let c = c.ok_or_else(|| Halt::abort(step, "missing encrypted mandate list"))?;
        reply = reply.field("c_c", SlotKind::Hybrid, c.bytes.clone());
    } else {
        let n: usize = env
            .meta_str("mandates.count")
            .or_abort(step)?
            .parse()
            .map_err(|_| Halt::abort(step, "bad mandate count"))?;
        let cr_pk = cx.pk(CR).ok_or_else(|| Halt::abort(step, "unknown CR"))?;
        let mut offered = Vec::new();
        for i in 1..=n.min(64) {
            let m = Mandate::from_bytes(env.plain_bytes(&format!("mandate.{i}")).or_abort(step)?)
                .or_abort(step)?;
            let sig = env.signature_field(&format!("mandate.{i}.sig")).or_abort(step)?;
            check(dss_verify(&cr_pk, &mandate_tbs(&m), &sig), step, "CR signature on mandate invalid")?;
            offered.push(m);
        }
        if offered.is_empty() {
            cx.step("9a");
            return Err(Halt::deny("9a", "no mandate registered for the citizen"));
        }
        reply = reply.meta("mandates.count", offered.len().to_string());
        for (i, m) in offered.iter().enumerate() {
            reply = reply.plain(format!("mandate.{}", i + 1), m.to_bytes());
        }
        flow.mis.offered = offered;
    }
    cx.step("9a");
    cx.send(reply)
}

/// Steps 9c–10 / 9c–11a.
pub(super) fn mandate_selection(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "9c";
    let mand_id = env.plain_str("mand_id").or_abort(step)?.to_owned();
    if cx.cloud() {
        let sigma_c = env.signature_field("sigma_c").or_abort(step)?;
        cx.step("11a");
        let reply = cx
            .envelope("11a", MsgType::MandateFetch, CR)
            .plain("mand_id", mand_id)
            .sig("sigma_c", &sigma_c);
        return cx.send(reply);
    }
    let mandate = flow
        .mis
        .offered
        .iter()
        .find(|m| m.mand_id == mand_id)
        .cloned()
        .ok_or_else(|| Halt::abort(step, "selected mandate was not offered"))?;
    cx.step("10");
    let bytes = mandate.to_bytes();
    let sig = dss_sign(&cx.ring().signing.sk, &e_mandate_tbs(&bytes, &mand_id));
    cx.step("13");
    let reply = cx
        .envelope("13", MsgType::MandateResponse, MOA_ID)
        .plain("mandate", bytes)
        .plain("mand_id", mand_id)
        .sig("e_mandate_sig", &sig);
    cx.send(reply)
}

/// Steps 12–13 (cloud only).
pub(super) fn mandate_record(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "12";
    let c = env.re_ct("c_mis").or_abort(step)?;
    let c_moa = forward(cx, MOA_ID, &c, step)?;
    cx.step("13");
    let reply = cx
        .envelope("13", MsgType::MandateResponse, MOA_ID)
        .re("c_moa", &c_moa);
    cx.send(reply)
}
