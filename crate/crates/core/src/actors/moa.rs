//! MOA-ID, the identification middleware. Cloud-hosted in both modes.

use std::collections::BTreeMap;

use super::mis::e_mandate_tbs;
use super::{check, forward, take_blocks, take_link, Cx, Flow, Halt, Next, OrAbort};
use crate::codec::Writer;
use crate::crypto::dss_verify;
use crate::eid::{
    derive_sspin, sspin_label, Certificate, ForeignCitizenData, IdentityLink, Mandate, ATTR_DOB,
    ATTR_NAME,
};
use crate::envelope::{Envelope, MsgType};
use crate::harness::Visibility;
use crate::pre::ReCiphertext;
use crate::scenario::UseCase;
use crate::world::{F_IDP, MIS, PEPS, SPR_GW};

/// Assertion attribute name for a link block label.
fn attribute_for(label: &str) -> &str {
    if label.starts_with("ssPIN:") {
        "ssPIN"
    } else {
        label
    }
}

/// Labels MOA-ID needs from the citizen's link.
fn required_labels(flow: &Flow, cx: &Cx<'_>) -> Vec<String> {
    let mut v = vec![sspin_label(&flow.moa.sector), ATTR_NAME.into(), ATTR_DOB.into()];
    if cx.spec.use_case == UseCase::Representation {
        v.push(sspin_label(&cx.world.registers.cr.sector));
    }
    v
}

/// Re-encrypts the assertion blocks to the online application.
fn assertion_to_sp(
    flow: &Flow,
    cx: &mut Cx<'_>,
    step: &str,
) -> Result<BTreeMap<String, ReCiphertext>, Halt> {
    let sp = cx.spec.sp.clone();
    let mut out = BTreeMap::new();
    for label in [sspin_label(&flow.moa.sector), ATTR_NAME.into(), ATTR_DOB.into()] {
        let c = flow
            .moa
            .blocks
            .get(&label)
            .ok_or_else(|| Halt::abort(step, format!("missing {label} block")))?;
        out.insert(attribute_for(&label).to_owned(), forward(cx, &sp, c, step)?);
    }
    Ok(out)
}

fn saml_cloud(cx: &mut Cx<'_>, step: &str, fields: BTreeMap<String, ReCiphertext>) -> Result<Next, Halt> {
    cx.step(step);
    let mut env = cx.envelope(step, MsgType::SamlResponse, &cx.spec.sp.clone());
    for (name, c) in &fields {
        env = env.re(name.clone(), c);
    }
    cx.send(env)
}

/// Plaintext assertion of the current mode. The ssPIN is derived here.
fn saml_current(
    flow: &Flow,
    cx: &mut Cx<'_>,
    derive_step: &str,
    step: &str,
    mandate: Option<Vec<u8>>,
) -> Result<Next, Halt> {
    let il = flow
        .moa
        .il
        .as_ref()
        .ok_or_else(|| Halt::abort(derive_step, "no Identity Link"))?;
    cx.step(derive_step);
    let source_pin = il
        .source_pin(&cx.spec.subject)
        .ok_or_else(|| Halt::abort(derive_step, "Identity Link lacks a sourcePIN"))?;
    let pin = derive_sspin(&source_pin, &flow.moa.sector).or_abort(derive_step)?;
    cx.observe("ssPIN", Visibility::Plaintext, pin.value());
    let name = il.get(ATTR_NAME).unwrap_or_default().to_vec();
    let dob = il.get(ATTR_DOB).unwrap_or_default().to_vec();
    cx.step(step);
    let mut env = cx
        .envelope(step, MsgType::SamlResponse, &cx.spec.sp.clone())
        .plain("ssPIN", pin.value().to_vec())
        .plain("name", name)
        .plain("date_of_birth", dob);
    if let Some(m) = mandate {
        env = env.plain("mandate", m);
    }
    cx.send(env)
}

/// Verifies a current-mode Identity Link and records what it reveals.
fn accept_link(cx: &mut Cx<'_>, bytes: &[u8], step: &str) -> Result<IdentityLink, Halt> {
    let il = IdentityLink::from_bytes(bytes).or_abort(step)?;
    check(il.verify(&cx.world.sra_pk()), step, "Identity Link signature invalid")?;
    let source_pin = il
        .source_pin(&cx.spec.subject)
        .ok_or_else(|| Halt::abort(step, "Identity Link lacks a sourcePIN"))?;
    cx.observe("source_pin", Visibility::Plaintext, source_pin.as_bytes());
    for attr in [ATTR_NAME, ATTR_DOB] {
        let v = il.get(attr).unwrap_or_default().to_vec();
        cx.observe(attr, Visibility::Plaintext, &v);
    }
    Ok(il)
}

/// Step 2: authentication request from the online application.
pub(super) fn auth_request(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "2";
    let sector = env.plain_str("sector").or_abort(step)?.to_owned();
    check(
        cx.world.scenario.sectors.contains(&sector),
        step,
        "unknown governmental sector",
    )?;
    flow.moa.sector = sector.clone();
    let subject = cx.spec.subject.clone();
    if cx.spec.use_case == UseCase::Foreign {
        cx.step("3");
        let reply = cx
            .envelope("3", MsgType::CountryPage, &subject)
            .meta("request", "select_country");
        return cx.send(reply);
    }
    cx.step("3a");
    let mut reply = cx.envelope("3a", MsgType::IlRequest, &subject);
    if cx.cloud() {
        reply = reply.plain("sector", sector);
        if cx.spec.use_case == UseCase::Representation {
            reply = reply.plain("register_sector", cx.world.registers.cr.sector.clone());
        }
    } else {
        reply = reply.meta("request", "identity_link");
    }
    cx.send(reply)
}

/// Steps 3d / 3c: the citizen's link and certificate.
pub(super) fn il_response(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let rep = cx.spec.use_case == UseCase::Representation;
    let step = if rep { "3c" } else { "3d" };
    let sra_pk = cx.world.sra_pk();
    let cert = Certificate::from_bytes(env.plain_bytes("certificate").or_abort(step)?).or_abort(step)?;
    check(cert.verify(&sra_pk), step, "certificate invalid")?;
    if cx.cloud() {
        let link = take_link(env).or_abort(step)?;
        check(link.verify(&sra_pk), step, "redactable signature invalid")?;
        check(cert.is_pseudonymous(), step, "expected a pseudonymous certificate")?;
        for (_, b) in link.visible_blocks().or_abort(step)? {
            flow.moa.blocks.insert(b.label, b.ciphertext);
        }
        for label in required_labels(flow, cx) {
            check(flow.moa.blocks.contains_key(&label), step, "required block redacted")?;
        }
    } else {
        let il = accept_link(cx, env.plain_bytes("identity_link").or_abort(step)?, step)?;
        check(
            il.get(crate::eid::ATTR_CERT_REF) == Some(cert.serial().as_bytes()),
            step,
            "certificate does not match the Identity Link",
        )?;
        flow.moa.il = Some(il);
    }
    flow.moa.cert = Some(cert);
    let text = format!(
        "authenticate at {}, session {}, t={}",
        cx.spec.sp, cx.spec.id, cx.clock
    );
    flow.moa.consent = text.clone().into_bytes();
    let next = if rep { "4" } else { "4a" };
    cx.step(next);
    let reply = cx
        .envelope(next, MsgType::SigRequest, &env.sender)
        .meta("consent", text);
    cx.send(reply)
}

/// Steps 4c–6 (Austrian) or 4–6 (representation).
pub(super) fn sig_response(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let rep = cx.spec.use_case == UseCase::Representation;
    let step = if rep { "4" } else { "4c" };
    let sig = env.signature_field("signature").or_abort(step)?;
    let cert = flow
        .moa
        .cert
        .as_ref()
        .ok_or_else(|| Halt::abort(step, "no certificate on record"))?;
    check(
        dss_verify(cert.public_key(), &flow.moa.consent, &sig),
        step,
        "citizen signature invalid",
    )?;
    match (rep, cx.cloud()) {
        (false, false) => saml_current(flow, cx, "5a", "6", None),
        (false, true) => {
            cx.step("5b");
            let fields = assertion_to_sp(flow, cx, "5b")?;
            cx.step("5c");
            saml_cloud(cx, "6", fields)
        }
        (true, true) => {
            cx.step("5");
            let label = sspin_label(&cx.world.registers.cr.sector);
            let c = flow
                .moa
                .blocks
                .get(&label)
                .cloned()
                .ok_or_else(|| Halt::abort("5", "missing company register ssPIN"))?;
            let c_mis = forward(cx, MIS, &c, "5")?;
            cx.step("6");
            let reply = cx.envelope("6", MsgType::MandateQuery, MIS).re("c_mis", &c_mis);
            cx.send(reply)
        }
        (true, false) => {
            let il = flow.moa.il.as_ref().map(IdentityLink::to_bytes).unwrap_or_default();
            let cert = cert.to_bytes();
            cx.step("6");
            let reply = cx
                .envelope("6", MsgType::MandateQuery, MIS)
                .plain("identity_link", il)
                .plain("certificate", cert)
                .plain("sector", flow.moa.sector.clone());
            cx.send(reply)
        }
    }
}

/// Steps 13–15 (representation).
pub(super) fn mandate_response(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "13";
    if cx.cloud() {
        let c = env.re_ct("c_moa").or_abort(step)?;
        cx.step("14");
        let sp = cx.spec.sp.clone();
        let mut fields = assertion_to_sp(flow, cx, "14")?;
        fields.insert("mandate".into(), forward(cx, &sp, &c, "14")?);
        return saml_cloud(cx, "15", fields);
    }
    let bytes = env.plain_bytes("mandate").or_abort(step)?.to_vec();
    let mand_id = env.plain_str("mand_id").or_abort(step)?.to_owned();
    let sig = env.signature_field("e_mandate_sig").or_abort(step)?;
    let mis_pk = cx.pk(MIS).ok_or_else(|| Halt::abort(step, "unknown MIS"))?;
    check(
        dss_verify(&mis_pk, &e_mandate_tbs(&bytes, &mand_id), &sig),
        step,
        "electronic mandate signature invalid",
    )?;
    let mandate = Mandate::from_bytes(&bytes).or_abort(step)?;
    let name = flow
        .moa
        .il
        .as_ref()
        .and_then(|il| il.get(ATTR_NAME))
        .unwrap_or_default();
    check(
        mandate.mand_id == mand_id && mandate.representative.as_bytes() == name,
        step,
        "mandate does not belong to the authenticated citizen",
    )?;
    saml_current(flow, cx, "14", "15", Some(bytes))
}

/// Step 4 (foreign): the citizen's home country.
pub(super) fn country_selection(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "4";
    flow.moa.country = env.plain_str("country").or_abort(step)?.to_owned();
    cx.step("5");
    let reply = cx
        .envelope("5", MsgType::StorkRequest, PEPS)
        .meta("request_id", format!("{}-stork", cx.spec.id))
        .meta("attributes", "given_name,family_name,date_of_birth,identifier");
    cx.send(reply)
}

/// Verifies a citizen's qualified signature over the F-IdP challenge.
pub(super) fn check_qualified(
    cx: &Cx<'_>,
    env: &Envelope,
    step: &str,
) -> Result<(Certificate, String), Halt> {
    let cert = Certificate::from_bytes(env.plain_bytes("certificate").or_abort(step)?).or_abort(step)?;
    let fidp = cx.pk(F_IDP).ok_or_else(|| Halt::abort(step, "unknown foreign IdP"))?;
    check(cert.verify(&fidp), step, "certificate invalid")?;
    let challenge = env.meta_str("challenge").or_abort(step)?.to_owned();
    let qs = env.signature_field("qualified_signature").or_abort(step)?;
    check(
        dss_verify(cert.public_key(), challenge.as_bytes(), &qs),
        step,
        "qualified signature invalid",
    )?;
    Ok((cert, challenge))
}

/// Steps 11–13 (foreign).
pub(super) fn stork_response(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "11";
    if cx.cloud() {
        let c = env.re_ct("c_moa").or_abort(step)?;
        cx.step("12");
        let c_sprgw = forward(cx, SPR_GW, &c, "12")?;
        cx.step("13");
        let reply = cx
            .envelope("13", MsgType::SprRequest, SPR_GW)
            .re("c_sprgw", &c_sprgw)
            .plain("sector", flow.moa.sector.clone());
        return cx.send(reply);
    }
    let (cert, challenge) = check_qualified(cx, env, step)?;
    let text = |f: &str| env.plain_str(f).map(str::to_owned).or_abort(step);
    let fc = ForeignCitizenData {
        given_name: text("given_name")?,
        family_name: text("family_name")?,
        date_of_birth: text("date_of_birth")?,
        identifier: text("identifier")?,
        country: flow.moa.country.clone(),
    };
    let qs = env.signature_field("qualified_signature").or_abort(step)?;
    cx.step("12");
    cx.step("13");
    let reply = cx
        .envelope("13", MsgType::SprRequest, SPR_GW)
        .plain("fc_data", fc.to_bytes())
        .plain("certificate", cert.to_bytes())
        .plain("country", flow.moa.country.clone())
        .meta("challenge", challenge)
        .sig("qualified_signature", &qs);
    cx.send(reply)
}

/// Steps 17–19 (foreign): the link issued by the SR.
pub(super) fn il_forward(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "17";
    if cx.cloud() {
        flow.moa.blocks = take_blocks(env).or_abort(step)?;
        for label in required_labels(flow, cx) {
            check(flow.moa.blocks.contains_key(&label), step, "required block missing")?;
        }
        cx.step("18b");
        let fields = assertion_to_sp(flow, cx, "18b")?;
        cx.step("18c");
        return saml_cloud(cx, "19", fields);
    }
    let il = accept_link(cx, env.plain_bytes("identity_link").or_abort(step)?, step)?;
    flow.moa.il = Some(il);
    saml_current(flow, cx, "18a", "19", None)
}

/// Payload the F-IdP encrypts for the foreign cloud flow.
pub(crate) fn assertion_bytes(fc_data: &[u8], cert: &[u8], challenge: &str, qs: &[u8]) -> Vec<u8> {
    let mut w = Writer::with_tag(b"eid-cloud/stork-assertion/v1");
    w.bytes(fc_data).bytes(cert).str(challenge).bytes(qs);
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_blocks_map_to_sspin_attribute() {
        assert_eq!(attribute_for("ssPIN:tax"), "ssPIN");
        assert_eq!(attribute_for("name"), "name");
    }
}
