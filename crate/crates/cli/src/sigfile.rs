//! JSON signature files.

use std::collections::BTreeMap;
use std::path::Path;

use pcpn_core::sigenv::{AssocDecl, FnDecl, ImplDecl, SigSource, StructDecl};
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SigFile {
    /// Opaque nominal types, `Name` or `Name<A, B>`.
    #[serde(default)]
    pub types: Vec<String>,
    #[serde(default)]
    pub structs: Vec<StructEntry>,
    #[serde(default)]
    pub impls: Vec<ImplEntry>,
    #[serde(default)]
    pub assoc: Vec<AssocEntry>,
    #[serde(default)]
    pub fns: Vec<FnEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StructEntry {
    pub name: String,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ImplEntry {
    pub ty: String,
    #[serde(rename = "trait")]
    pub trait_name: String,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AssocEntry {
    pub ty: String,
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FnEntry {
    pub name: String,
    /// Owning type for associated functions and methods.
    #[serde(default, rename = "self", skip_serializing_if = "Option::is_none")]
    pub self_ty: Option<String>,
    #[serde(default)]
    pub generics: Vec<String>,
    #[serde(default)]
    pub lifetimes: Vec<String>,
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ret: Option<String>,
    #[serde(default)]
    pub bounds: Vec<String>,
}

impl From<SigFile> for SigSource {
    fn from(f: SigFile) -> Self {
        SigSource {
            types: f.types,
            structs: f.structs.into_iter().map(|s| StructDecl { name: s.name, fields: s.fields.into_iter().collect() }).collect(),
            impls: f.impls.into_iter().map(|i| ImplDecl { ty: i.ty, trait_name: i.trait_name }).collect(),
            assoc: f
                .assoc
                .into_iter()
                .map(|a| AssocDecl { ty: a.ty, trait_name: a.trait_name, name: a.name, value: a.value })
                .collect(),
            fns: f
                .fns
                .into_iter()
                .map(|x| FnDecl {
                    name: x.name,
                    self_ty: x.self_ty,
                    generics: x.generics,
                    lifetimes: x.lifetimes,
                    params: x.params,
                    ret: x.ret,
                    bounds: x.bounds,
                })
                .collect(),
        }
    }
}

impl From<&SigSource> for SigFile {
    fn from(s: &SigSource) -> Self {
        SigFile {
            types: s.types.clone(),
            structs: s.structs.iter().map(|d| StructEntry { name: d.name.clone(), fields: d.fields.iter().cloned().collect() }).collect(),
            impls: s.impls.iter().map(|i| ImplEntry { ty: i.ty.clone(), trait_name: i.trait_name.clone() }).collect(),
            assoc: s
                .assoc
                .iter()
                .map(|a| AssocEntry { ty: a.ty.clone(), trait_name: a.trait_name.clone(), name: a.name.clone(), value: a.value.clone() })
                .collect(),
            fns: s
                .fns
                .iter()
                .map(|x| FnEntry {
                    name: x.name.clone(),
                    self_ty: x.self_ty.clone(),
                    generics: x.generics.clone(),
                    lifetimes: x.lifetimes.clone(),
                    params: x.params.clone(),
                    ret: x.ret.clone(),
                    bounds: x.bounds.clone(),
                })
                .collect(),
        }
    }
}

pub fn parse_sig(text: &str) -> serde_json::Result<SigSource> {
    serde_json::from_str::<SigFile>(text).map(Into::into)
}

/// Pretty JSON; struct fields come out in name order.
pub fn write_sig(src: &SigSource) -> String {
    serde_json::to_string_pretty(&SigFile::from(src)).expect("signature files always serialize")
}

pub fn load_sig(path: &Path) -> anyhow::Result<SigSource> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse_sig(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}
