import { describe, expect, it } from "vitest";

import { checkUpload, MAX_UPLOAD_BYTES } from "../src/validation.js";

describe("upload validation", () => {
  it("accepts a small .pdb file", () => {
    expect(checkUpload("1abc.pdb", 40_000)).toEqual({ ok: true });
  });

  it("rejects a 3 MB file before any network call", () => {
    const res = checkUpload("big.pdb", 3 * 1024 * 1024);
    expect(res.ok).toBe(false);
    expect(res.reason).toContain("2 MB");
  });

  it("accepts a file exactly at the cap", () => {
    expect(checkUpload("edge.pdb", MAX_UPLOAD_BYTES).ok).toBe(true);
  });

  it("rejects empty files", () => {
    expect(checkUpload("empty.pdb", 0).ok).toBe(false);
  });

  it("rejects unexpected extensions", () => {
    const res = checkUpload("model.cif", 1000);
    expect(res.ok).toBe(false);
    expect(res.reason).toContain("model.cif");
  });
});
