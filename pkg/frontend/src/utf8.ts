// UTF-8 byte offset <-> JS string index conversion. The API speaks bytes;
// DOM selections speak UTF-16 code units.

const encoder = new TextEncoder();

export function byteLength(text: string): number {
  return encoder.encode(text).length;
}

/** Byte offset of the code point at UTF-16 index `charIndex`. */
export function charToByte(text: string, charIndex: number): number {
  let bytes = 0;
  let i = 0;
  for (const ch of text) {
    if (i >= charIndex) break;
    bytes += encoder.encode(ch).length;
    i += ch.length; // surrogate pairs advance by 2 UTF-16 units
  }
  return bytes;
}

/** UTF-16 index of the code point starting at byte offset `byteOffset`. */
export function byteToChar(text: string, byteOffset: number): number {
  let bytes = 0;
  let i = 0;
  for (const ch of text) {
    if (bytes >= byteOffset) break;
    bytes += encoder.encode(ch).length;
    i += ch.length;
  }
  return i;
}

/** Slice `text` by byte offsets, matching the server's span semantics. */
export function sliceBytes(text: string, start: number, end: number): string {
  return text.slice(byteToChar(text, start), byteToChar(text, end));
}
