/** Wire types of the review service API, mirrored field for field. */

export type Status = "pending" | "accepted" | "rejected" | "relabeled" | "adjusted";

export type Action = "accept" | "reject" | "relabel" | "adjust";

/** [x, y, w, h] in image pixels, top-left corner plus extent. */
export type WireBox = [number, number, number, number];

export interface ImageInfo {
  dataset: string;
  image_id: string;
  file_path: string;
  width: number;
  height: number;
}

export interface ReviewItem {
  item_id: string;
  image: ImageInfo;
  category_id: number;
  bbox: WireBox;
  model_id: string;
  confidence: number;
  status: Status;
  decided_by: string | null;
  decided_at: string | null;
  new_category_id: number | null;
  new_bbox: WireBox | null;
}

export interface ItemsPage {
  items: ReviewItem[];
  total: number;
}

export interface Category {
  id: number;
  name: string;
  aliases: string[];
}

export interface LabelSpaceDoc {
  categories: Category[];
}

export interface Stats {
  total: number;
  by_status: Record<Status, number>;
  duplicate_enqueues: number;
  decisions: number;
  routes: Record<string, number>;
}

export interface DecisionRequest {
  action: Action;
  actor?: string;
  category_id?: number;
  bbox?: WireBox;
}
