// DOM bindings: renders the store's state and forwards user input to it.

import { ApiClient } from "./api";
import { SLIDER_BOUNDS, TryOnStore, ViewerState } from "./state";
import { ModelViewer } from "./viewer";

export function mountApp(root: HTMLElement, store: TryOnStore, api: ApiClient) {
  root.innerHTML = `
    <header>
      <h1>eyefit</h1>
      <p class="tagline">upload landmarks, pick a frame, tune the fit</p>
    </header>
    <div id="banner" class="banner hidden"></div>
    <main>
      <section class="panel" id="upload-panel">
        <h2>1 · Subject</h2>
        <label class="file-label">landmarks file (.json)
          <input type="file" id="landmarks-input" accept=".json,application/json">
        </label>
        <label class="file-label hidden" id="photo-label">photo
          <input type="file" id="photo-input" accept="image/*">
        </label>
        <div id="upload-error" class="inline-error hidden"></div>
        <div id="subject-info" class="muted">no subject yet</div>
      </section>
      <section class="panel" id="catalog-panel">
        <h2>2 · Frames</h2>
        <div id="catalog-grid" class="grid"></div>
      </section>
      <section class="panel" id="fit-panel">
        <h2>3 · Fit</h2>
        <label>forward offset <span id="forward-value"></span> mm
          <input type="range" id="forward-slider"
                 min="${SLIDER_BOUNDS.forward_offset_mm.min}" max="${SLIDER_BOUNDS.forward_offset_mm.max}" step="0.5">
        </label>
        <label>vertical offset <span id="vertical-value"></span> mm
          <input type="range" id="vertical-slider"
                 min="${SLIDER_BOUNDS.vertical_offset_mm.min}" max="${SLIDER_BOUNDS.vertical_offset_mm.max}" step="0.5">
        </label>
        <label><input type="checkbox" id="scale-toggle"> override scale
          <span id="scale-value"></span>
          <input type="range" id="scale-slider" disabled
                 min="${SLIDER_BOUNDS.scale_override.min}" max="${SLIDER_BOUNDS.scale_override.max}" step="0.05">
        </label>
      </section>
    </main>
    <section id="viewer-wrap">
      <div id="viewer"></div>
      <div id="viewer-status" class="muted"></div>
    </section>
    <div id="toasts"></div>
  `;

  const viewer = new ModelViewer(el("viewer"));
  let shownUrl: string | undefined;

  el<HTMLInputElement>("landmarks-input").addEventListener("change", async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (file) await store.submitSubject(await file.text(), file.name);
  });
  el<HTMLInputElement>("photo-input").addEventListener("change", async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (file) await store.submitSubject(file, file.name);
  });

  const forward = el<HTMLInputElement>("forward-slider");
  const vertical = el<HTMLInputElement>("vertical-slider");
  const scaleToggle = el<HTMLInputElement>("scale-toggle");
  const scaleSlider = el<HTMLInputElement>("scale-slider");
  forward.addEventListener("input", () =>
    store.updateFitParams({ forward_offset_mm: Number(forward.value) }),
  );
  vertical.addEventListener("input", () =>
    store.updateFitParams({ vertical_offset_mm: Number(vertical.value) }),
  );
  scaleToggle.addEventListener("change", () =>
    store.updateFitParams({
      scale_override: scaleToggle.checked ? Number(scaleSlider.value) : undefined,
    }),
  );
  scaleSlider.addEventListener("input", () =>
    store.updateFitParams({ scale_override: Number(scaleSlider.value) }),
  );

  store.subscribe((state) => render(state));
  render(store.state);

  function render(state: ViewerState) {
    // banner / global status
    const banner = el("banner");
    if (state.status.kind === "error") {
      banner.classList.remove("hidden");
      banner.innerHTML = "";
      banner.append(state.status.message);
      if (state.status.retryable) {
        const retry = document.createElement("button");
        retry.textContent = "retry";
        retry.addEventListener("click", () => void store.loadCatalog());
        banner.append(" ", retry);
      }
    } else {
      banner.classList.add("hidden");
    }

    el("photo-label").classList.toggle("hidden", !state.detectorConfigured);

    const uploadError = el("upload-error");
    uploadError.classList.toggle("hidden", !state.uploadError);
    uploadError.textContent = state.uploadError ?? "";
    el("subject-info").textContent = state.subjectId
      ? `subject ${state.subjectId.slice(0, 8)}… ready`
      : "no subject yet";

    // catalog grid
    const grid = el("catalog-grid");
    grid.innerHTML = "";
    if (state.catalog.length === 0 && state.status.kind !== "loading") {
      grid.innerHTML = `<p class="muted">catalog is empty</p>`;
    }
    for (const entry of state.catalog) {
      const card = document.createElement("button");
      card.className = "card" + (entry.id === state.selectedFrameId ? " selected" : "");
      card.textContent = entry.display_name;
      card.disabled = !state.subjectId;
      card.addEventListener("click", () => store.selectFrame(entry.id));
      grid.append(card);
    }

    // sliders reflect state (e.g. after clamping)
    forward.value = String(state.fitParams.forward_offset_mm);
    vertical.value = String(state.fitParams.vertical_offset_mm);
    el("forward-value").textContent = state.fitParams.forward_offset_mm.toFixed(1);
    el("vertical-value").textContent = state.fitParams.vertical_offset_mm.toFixed(1);
    const hasScale = state.fitParams.scale_override !== undefined;
    scaleToggle.checked = hasScale;
    scaleSlider.disabled = !hasScale;
    if (hasScale) scaleSlider.value = String(state.fitParams.scale_override);
    el("scale-value").textContent = hasScale
      ? `×${state.fitParams.scale_override!.toFixed(2)}`
      : "(auto from IPD)";

    el("viewer-status").textContent =
      state.status.kind === "loading" ? `loading ${state.status.what}…` : "";

    // toasts (non-blocking, e.g. cannot-fit)
    const toasts = el("toasts");
    toasts.innerHTML = "";
    for (const message of state.toasts) {
      const node = document.createElement("div");
      node.className = "toast";
      node.textContent = message;
      node.addEventListener("click", () => store.dismissToasts());
      toasts.append(node);
    }

    if (state.currentGlbUrl && state.currentGlbUrl !== shownUrl) {
      shownUrl = state.currentGlbUrl;
      void viewer.show(api.assetUrl(state.currentGlbUrl));
    }
  }

  function el<T extends HTMLElement = HTMLElement>(id: string): T {
    return root.querySelector(`#${id}`) as T;
  }
}
