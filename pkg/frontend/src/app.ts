/** Browser entry point: a rating panel driven by the session loop and a
 * coordinator dashboard fed by the report endpoint.  The server's ordering
 * is the only ordering; the page keeps no rating state of its own.
 */

import { ApiClient, ApiError } from "./api";
import { buildDashboard, renderDashboard, renderErrorState } from "./dashboard";
import { runSession, SessionView } from "./session";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let activeButtons: HTMLButtonElement[] = [];

document.addEventListener("keydown", (event) => {
  const index = Number(event.key) - 1;
  if (Number.isInteger(index) && index >= 0 && index < activeButtons.length) {
    activeButtons[index]?.click();
  }
});

function presentItem(view: SessionView): Promise<string> {
  el<HTMLElement>("case-id").textContent = view.caseId;
  el<HTMLElement>("progress").textContent = `${view.position} / ${view.total}`;
  const asset = el<HTMLElement>("asset");
  if (/\.(png|jpe?g|gif|webp)$/i.test(view.assetRef)) {
    asset.innerHTML = "";
    const img = document.createElement("img");
    img.src = view.assetRef;
    img.alt = view.caseId;
    asset.appendChild(img);
  } else {
    asset.textContent = view.assetRef;
  }

  const holder = el<HTMLElement>("labels");
  holder.innerHTML = "";
  activeButtons = [];
  return new Promise<string>((resolve) => {
    view.labels.forEach((label, i) => {
      const button = document.createElement("button");
      button.type = "button";
      button.textContent = `${i + 1} · ${label}`;
      button.addEventListener("click", () => {
        activeButtons = [];
        holder.innerHTML = "";
        resolve(label);
      });
      holder.appendChild(button);
      activeButtons.push(button);
    });
  });
}

async function startSession(): Promise<void> {
  const studyId = el<HTMLInputElement>("session-study").value.trim();
  const raterId = el<HTMLInputElement>("session-rater").value.trim();
  const phase = el<HTMLSelectElement>("session-phase").value as "T0" | "T1";
  const banner = el<HTMLElement>("retry-banner");
  const message = el<HTMLElement>("session-message");
  message.textContent = "";
  el<HTMLElement>("rating-panel").hidden = false;
  try {
    const result = await runSession(api, studyId, raterId, phase, {
      chooseLabel: presentItem,
      onSubmitted: () => {
        banner.hidden = true;
      },
      onRetry: (_err, attempt) => {
        banner.textContent = `Connection lost — retrying submission (attempt ${attempt})…`;
        banner.hidden = false;
      },
    });
    message.textContent = `Phase ${phase} complete: ${result.submitted} new rating(s), ${result.total} case(s).`;
  } catch (err) {
    message.textContent =
      err instanceof ApiError ? err.message : `Session failed: ${String(err)}`;
  } finally {
    banner.hidden = true;
    el<HTMLElement>("rating-panel").hidden = true;
  }
}

async function refreshDashboard(): Promise<void> {
  const studyId = el<HTMLInputElement>("dashboard-study").value.trim();
  const target = el<HTMLElement>("dashboard");
  try {
    const report = await api.report(studyId);
    target.innerHTML = renderDashboard(buildDashboard(report));
  } catch (err) {
    target.innerHTML = renderErrorState(
      err instanceof ApiError ? err.detail : String(err),
    );
  }
}

el<HTMLButtonElement>("session-start").addEventListener("click", () => {
  void startSession();
});
el<HTMLButtonElement>("dashboard-refresh").addEventListener("click", () => {
  void refreshDashboard();
});
