export const MAX_UPLOAD_BYTES = 2 * 1024 * 1024;

export interface UploadCheck {
  ok: boolean;
  reason?: string;
}

/** Client-side pre-checks; anything deeper (parseability, residue counts)
 *  is the server's job and is surfaced from its response verbatim. */
export function checkUpload(name: string, sizeBytes: number): UploadCheck {
  if (sizeBytes > MAX_UPLOAD_BYTES) {
    const mb = (sizeBytes / (1024 * 1024)).toFixed(1);
    return { ok: false, reason: `file is ${mb} MB; the service caps uploads at 2 MB` };
  }
  if (sizeBytes === 0) {
    return { ok: false, reason: "file is empty" };
  }
  const lower = name.toLowerCase();
  if (!lower.endsWith(".pdb") && !lower.endsWith(".ent") && !lower.endsWith(".txt")) {
    return { ok: false, reason: `expected a .pdb file, got "${name}"` };
  }
  return { ok: true };
}
