// Presentation helpers for the four-swatch identity colour code the engine
// derives from a key fingerprint (digest bytes 0..11, three bytes per swatch).

import { RgbTriple } from "./protocol.js";

export function cssHex(triple: RgbTriple): string {
  const [r, g, b] = triple;
  return "#" + [r, g, b].map((v) => v.toString(16).padStart(2, "0")).join("");
}

// The fingerprint display groups the digest as uppercase hex in 4-byte words
// ("09AF0735 ..."); the swatch bytes are simply the first twelve digest bytes.
export function swatchesFromFingerprint(display: string): RgbTriple[] {
  const hex = display.replace(/\s+/g, "");
  if (hex.length < 24 || /[^0-9a-fA-F]/.test(hex)) {
    throw new Error(`not a fingerprint display: ${display}`);
  }
  const bytes: number[] = [];
  for (let i = 0; i < 24; i += 2) {
    bytes.push(parseInt(hex.slice(i, i + 2), 16));
  }
  const swatches: RgbTriple[] = [];
  for (let i = 0; i < 12; i += 3) {
    swatches.push([bytes[i]!, bytes[i + 1]!, bytes[i + 2]!]);
  }
  return swatches;
}
