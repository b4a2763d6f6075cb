// Minimal display-only highlighter for Python-style code. Comments and
// strings are matched first so markers inside literals never color as
// comments; everything is HTML-escaped before wrapping.

const PY_KEYWORDS = new Set([
  "False", "None", "True", "and", "as", "assert", "async", "await", "break",
  "class", "continue", "def", "del", "elif", "else", "except", "finally",
  "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
  "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
]);

const TOKEN_RE =
  /(#[^\n]*)|("""[\s\S]*?"""|'''[\s\S]*?'''|"(?:\\.|[^"\\\n])*"|'(?:\\.|[^'\\\n])*')|\b(\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\b|\b([A-Za-z_][A-Za-z0-9_]*)\b/g;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function highlight(code: string): string {
  let html = "";
  let last = 0;
  for (const match of code.matchAll(TOKEN_RE)) {
    const index = match.index ?? 0;
    html += escapeHtml(code.slice(last, index));
    const [text, comment, str, num, word] = match;
    if (comment !== undefined) {
      html += `<span class="tok-comment">${escapeHtml(text)}</span>`;
    } else if (str !== undefined) {
      html += `<span class="tok-string">${escapeHtml(text)}</span>`;
    } else if (num !== undefined) {
      html += `<span class="tok-number">${escapeHtml(text)}</span>`;
    } else if (word !== undefined && PY_KEYWORDS.has(word)) {
      html += `<span class="tok-keyword">${escapeHtml(text)}</span>`;
    } else {
      html += escapeHtml(text);
    }
    last = index + text.length;
  }
  html += escapeHtml(code.slice(last));
  return html;
}
