//! Company register (trusted): mandate search and retrieval.

use super::{check, Cx, Flow, Halt, Next, OrAbort};
use crate::codec::Writer;
use crate::crypto::{dss_sign, dss_verify, hybrid_encrypt, Signature};
use crate::eid::{Mandate, SsPin};
use crate::envelope::{Envelope, MsgType};
use crate::pre::{re_decrypt, re_encrypt};
use crate::world::{CR, MIS, SRA};

pub(super) const OFFER_TAG: &[u8] = b"eid-cloud/mandate-offer/v1";

/// Bytes signed by the CR for one mandate: `mand ‖ mandID`.
pub(crate) fn mandate_tbs(m: &Mandate) -> Vec<u8> {
    let mut w = Writer::with_tag(b"eid-cloud/mandate-sig/v1");
    w.bytes(&m.to_bytes()).str(&m.mand_id);
    w.finish()
}

fn offer_bytes(list: &[(Mandate, Signature)]) -> Vec<u8> {
    let mut w = Writer::with_tag(OFFER_TAG);
    w.u32(list.len() as u32);
    for (m, sig) in list {
        w.bytes(&m.to_bytes()).str(&m.mand_id).bytes(&sig.to_bytes());
    }
    w.finish()
}

/// Steps 8a–8c.
pub(super) fn register_query(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "8a";
    let pin: Vec<u8> = if cx.cloud() {
        let c = env.re_ct("c_cr").or_abort(step)?;
        let sk = cx
            .ring()
            .re_identities
            .get(CR)
            .ok_or_else(|| Halt::abort(step, "CR holds no identity key"))?
            .clone();
        re_decrypt(&sk, &c).or_abort(step)?
    } else {
        env.plain_bytes("sspin").or_abort(step)?.to_vec()
    };
    let value: [u8; 32] = pin
        .as_slice()
        .try_into()
        .map_err(|_| Halt::abort(step, "ssPIN has wrong length"))?;
    let register = &cx.world.registers.cr;
    let found = register.cr_find_mandates(&SsPin::new(register.sector.clone(), value));
    let sk = cx.ring().signing.sk.clone();
    let signed: Vec<(Mandate, Signature)> = found
        .into_iter()
        .map(|m| {
            let sig = dss_sign(&sk, &mandate_tbs(&m));
            (m, sig)
        })
        .collect();
    flow.cr.offered = signed.iter().map(|(m, _)| m.mand_id.clone()).collect();
    flow.cr.representative = signed.first().map(|(m, _)| m.representative_ref.clone());

    let mut reply = cx.envelope("8c", MsgType::RegisterResponse, &env.sender);
    if cx.cloud() {
        match &flow.cr.representative {
            None => reply = reply.meta("result", "none"),
            Some(rep) => {
                cx.step("8b");
                let pk = cx
                    .world
                    .directory
                    .actor(rep)
                    .and_then(|a| a.pke_pk)
                    .ok_or_else(|| Halt::abort("8b", "representative has no encryption key"))?;
                let c = hybrid_encrypt(&pk, &offer_bytes(&signed), &mut *cx.rng).or_abort("8b")?;
                reply = reply.meta("result", "found").hybrid("c_c", &c);
            }
        }
    } else {
        reply = reply.meta("mandates.count", signed.len().to_string());
        for (i, (m, sig)) in signed.iter().enumerate() {
            reply = reply
                .plain(format!("mandate.{}", i + 1), m.to_bytes())
                .sig(format!("mandate.{}.sig", i + 1), sig);
        }
    }
    cx.step("8c");
    cx.send(reply)
}

/// Steps 11a–11c (cloud only).
pub(super) fn mandate_fetch(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "11a";
    let mand_id = env.plain_str("mand_id").or_abort(step)?.to_owned();
    let sigma_c = env.signature_field("sigma_c").or_abort(step)?;
    let rep = flow
        .cr
        .representative
        .clone()
        .ok_or_else(|| Halt::abort(step, "no mandate search in this session"))?;
    let pk = cx.pk(&rep).ok_or_else(|| Halt::abort(step, "unknown representative"))?;
    check(dss_verify(&pk, mand_id.as_bytes(), &sigma_c), step, "citizen signature on mandID invalid")?;
    check(flow.cr.offered.contains(&mand_id), step, "selected mandate was not offered")?;
    cx.step("11b");
    let mandate = cx.world.registers.cr.cr_fetch_mandate(&mand_id).or_abort("11b")?;
    let params = cx.world.directory.params(SRA).clone();
    let c = re_encrypt(&params, MIS, &mandate.to_bytes(), &mut *cx.rng).or_abort("11b")?;
    cx.step("11c");
    let reply = cx
        .envelope("11c", MsgType::MandateRecord, &env.sender)
        .re("c_mis", &c);
    cx.send(reply)
}
